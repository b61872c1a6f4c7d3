#include "mtforge/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mtforge/error.hpp"

namespace mtforge {

TokenSentence split_tokens(const std::string& line, Lang lang) {
  TokenSentence t;
  t.lang = lang;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) t.tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return t;
}

const char* to_string(Origin o) {
  switch (o) {
    case Origin::REAL: return "REAL";
    case Origin::BT: return "BT";
    case Origin::FT: return "FT";
    case Origin::NOISE: return "NOISE";
  }
  return "REAL";
}

const char* to_string(Domain d) {
  switch (d) {
    case Domain::BIO: return "BIO";
    case Domain::NEWS: return "NEWS";
    case Domain::INHOUSE: return "INHOUSE";
  }
  return "BIO";
}

Origin origin_from_string(const std::string& s) {
  if (s == "REAL") return Origin::REAL;
  if (s == "BT") return Origin::BT;
  if (s == "FT") return Origin::FT;
  if (s == "NOISE") return Origin::NOISE;
  raise(Errc::parse, "unknown origin: " + s);
}

Domain domain_from_string(const std::string& s) {
  if (s == "BIO") return Domain::BIO;
  if (s == "NEWS") return Domain::NEWS;
  if (s == "INHOUSE") return Domain::INHOUSE;
  raise(Errc::parse, "unknown domain: " + s);
}

}  // namespace mtforge

namespace mtforge::io {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io, "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::io, "cannot write " + path);
  for (const auto& l : lines) out << l << '\n';
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::io, "cannot write " + path);
  out << content;
}

std::string pair_to_tsv(const SentencePair& p) {
  return join_tokens(p.src) + "\t" + join_tokens(p.tgt);
}

SentencePair pair_from_tsv(const std::string& line, Origin origin, Domain domain) {
  auto tab = line.find('\t');
  if (tab == std::string::npos) raise(Errc::parse, "corpus line missing TAB: " + line);
  SentencePair p;
  p.src = split_tokens(line.substr(0, tab), Lang::ZH);
  p.tgt = split_tokens(line.substr(tab + 1), Lang::EN);
  p.origin = origin;
  p.domain = domain;
  return p;
}

Corpus read_corpus_tsv(const std::string& path, Origin origin, Domain domain) {
  Corpus corpus;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    corpus.push_back(pair_from_tsv(line, origin, domain));
  }
  return corpus;
}

void write_corpus_tsv(const std::string& path, const Corpus& corpus) {
  std::vector<std::string> lines;
  lines.reserve(corpus.size());
  for (const auto& p : corpus) lines.push_back(pair_to_tsv(p));
  write_lines(path, lines);
}

std::string Digest::hex() const {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%016llx-%llu", static_cast<unsigned long long>(fnv64),
                static_cast<unsigned long long>(bytes));
  return buf;
}

Digest digest_bytes(const std::string& data) {
  Digest d;
  d.bytes = data.size();
  uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  d.fnv64 = h;
  return d;
}

Digest digest_file(const std::string& path) { return digest_bytes(read_file(path)); }

}  // namespace mtforge::io
