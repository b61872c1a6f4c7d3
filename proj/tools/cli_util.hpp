#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "mtforge.h"

namespace cli {

inline void check(mtf_code code) {
  if (code == MTF_OK) return;
  std::cerr << "error: " << mtf_last_error() << "\n";
  std::exit(1);
}

// Runs an op over stdin lines, one result line per input line.
template <typename F>
void pipe_lines(F&& per_line) {
  std::string line;
  while (std::getline(std::cin, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::cout << per_line(line) << "\n";
  }
}

inline std::string owned(char* s) {
  std::string out = s ? s : "";
  mtf_string_free(s);
  return out;
}

// Buffers stdin into a temp file so path-based APIs can read "-".
inline std::string materialize_stdin() {
  std::string path = "/tmp/mtf_stdin_" + std::to_string(::getpid()) + ".tmp";
  std::ofstream out(path, std::ios::binary);
  out << std::cin.rdbuf();
  return path;
}

}  // namespace cli
