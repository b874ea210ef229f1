#pragma once

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "phasegen/generator.hpp"
#include "phasegen/types.hpp"

namespace testing_support {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("phasegen_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<double> randn(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline std::vector<float> randn_f(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  auto d = randn(n, seed, sd);
  return {d.begin(), d.end()};
}

inline phasegen::GeneratorModel small_mlp(std::size_t k, phasegen::Shape3 out, std::uint64_t seed = 7,
                                          std::size_t hidden = 16) {
  phasegen::SyntheticSpec spec;
  spec.seed = seed;
  spec.latent_dim = k;
  spec.output = out;
  spec.hidden = hidden;
  return phasegen::make_synthetic_generator(spec);
}

}  // namespace testing_support
