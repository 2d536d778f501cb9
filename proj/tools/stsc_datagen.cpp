#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "stsc/datagen.hpp"

int main(int argc, char** argv) {
  CLI::App app{"generate the synthetic image corpus used by the stsc lab"};
  std::string root = "data/cifar10";
  std::uint64_t seed = 1;
  bool force = false;
  app.add_option("--root", root, "corpus directory")->capture_default_str();
  app.add_option("--seed", seed, "generation seed")->capture_default_str();
  app.add_flag("--force", force, "regenerate even if a corpus is already present");
  CLI11_PARSE(app, argc, argv);

  try {
    if (!force && stsc::corpus_present(root)) {
      std::printf("corpus already present at %s (use --force to regenerate)\n", root.c_str());
      return 0;
    }
    stsc::generate_corpus(root, seed);
    std::printf("wrote corpus to %s (seed %llu)\n", root.c_str(),
                static_cast<unsigned long long>(seed));
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
