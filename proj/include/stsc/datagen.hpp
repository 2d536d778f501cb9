#pragma once

#include <cstdint>
#include <string>

namespace stsc {

// writes a synthetic corpus (5 train files, 1 test file, checksums.txt) in
// the packed record layout the loader expects; images are procedural
// class-conditioned textures so codecs have real structure to learn
void generate_corpus(const std::string& root, std::uint64_t seed);

// true when the directory already holds a verifiable corpus
bool corpus_present(const std::string& root);

}  // namespace stsc
