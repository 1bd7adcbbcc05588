#ifndef HOLOGEN_TEST_HELPERS_HPP
#define HOLOGEN_TEST_HELPERS_HPP

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "hologen/composition.hpp"
#include "hologen/rng.hpp"

namespace test {

/// Random strictly positive composition, roughly Dirichlet-ish.
inline hologen::Vector random_composition(int n, hologen::Rng& rng) {
    std::gamma_distribution<double> gamma(0.8, 1.0);
    hologen::Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = std::max(gamma(rng), 1e-9);
    return v / v.sum();
}

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("hologen_test_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::filesystem::path write_file(const std::filesystem::path& dir,
                                        const std::string& name, const std::string& contents) {
    const auto path = dir / name;
    std::ofstream out(path);
    out << contents;
    return path;
}

} // namespace test

#endif
