#pragma once

// Test-side oracles and fixtures. Nothing here calls into the library code it
// is used to check.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

namespace wmtest {

inline const std::filesystem::path kDataDir = WMPROBE_TEST_DATA;
inline const std::filesystem::path kFont = kDataDir / "DejaVuSans.ttf";
inline const std::filesystem::path kCharsetDir = WMPROBE_CHARSET_DIR;

// O(n*m) pair counting: P(pos > neg) + 0.5 P(pos == neg).
inline double brute_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  long double wins = 0;
  for (double p : pos)
    for (double n : neg) wins += p > n ? 1.0L : (p == n ? 0.5L : 0.0L);
  return static_cast<double>(wins / (static_cast<long double>(pos.size()) * neg.size()));
}

// Random AUC instance: class sizes in [1, max_n]; with ties, values come from
// a small integer grid.
struct AucInstance {
  std::vector<double> pos, neg;
};

inline AucInstance random_instance(std::mt19937_64& rng, int max_n, bool ties) {
  std::uniform_int_distribution<int> size(1, max_n);
  std::uniform_int_distribution<int> grid(0, 9);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> shift(-1.0, 1.0);
  AucInstance inst;
  const double s = shift(rng);
  const int np = size(rng), nn = size(rng);
  for (int i = 0; i < np; ++i) inst.pos.push_back(ties ? grid(rng) : normal(rng) + s);
  for (int i = 0; i < nn; ++i) inst.neg.push_back(ties ? grid(rng) : normal(rng));
  return inst;
}

// Per-channel mean over H*W of an NCHW buffer, straight loops.
inline std::vector<double> naive_pool(const std::vector<float>& nchw, int n, int c, int h, int w) {
  std::vector<double> out(static_cast<std::size_t>(n) * c);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < c; ++k) {
      double total = 0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          total += nchw[((static_cast<std::size_t>(i) * c + k) * h + y) * w + x];
      out[static_cast<std::size_t>(i) * c + k] = total / (h * w);
    }
  return out;
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() /
            ("wmprobe_" + name + "_" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

// FNV-1a over every file under `root`, in sorted path order, including names.
inline std::uint64_t tree_digest(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint8_t b) { h = (h ^ b) * 1099511628211ull; };
  for (const auto& f : files) {
    for (char ch : std::filesystem::relative(f, root).generic_string()) mix(static_cast<std::uint8_t>(ch));
    for (auto b : read_bytes(f)) mix(b);
  }
  return h;
}

}  // namespace wmtest
