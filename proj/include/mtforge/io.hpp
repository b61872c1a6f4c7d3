#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtforge/lang.hpp"

namespace mtforge::io {

std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::string& path, const std::vector<std::string>& lines);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// Corpus TSV: "src<TAB>tgt", one pair per line, tokens space-separated.
// Origin/domain are per-file metadata supplied by the caller.
Corpus read_corpus_tsv(const std::string& path, Origin origin = Origin::REAL,
                       Domain domain = Domain::BIO);
void write_corpus_tsv(const std::string& path, const Corpus& corpus);

std::string pair_to_tsv(const SentencePair& p);
SentencePair pair_from_tsv(const std::string& line, Origin origin, Domain domain);

struct Digest {
  uint64_t bytes = 0;   // full content length
  uint64_t fnv64 = 0;   // FNV-1a over the content
  std::string hex() const;
  bool operator==(const Digest&) const = default;
};

Digest digest_bytes(const std::string& data);
Digest digest_file(const std::string& path);

}  // namespace mtforge::io
