#pragma once

#include "driftlab/error.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#define CHECK_THROWS_KIND(expr, k)                                   \
    do {                                                             \
        bool thrown_ = false;                                        \
        try {                                                        \
            (void)(expr);                                            \
        } catch (const driftlab::Error& e_) {                        \
            thrown_ = true;                                          \
            CHECK_MESSAGE(e_.kind() == (k), e_.what());              \
        }                                                            \
        CHECK_MESSAGE(thrown_, "expected driftlab::Error: " #expr);  \
    } while (0)

namespace support {

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<std::vector<double>> rows_of(const Eigen::MatrixXd& X) {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < X.cols(); ++j) out[static_cast<std::size_t>(i)].push_back(X(i, j));
    return out;
}

// normal draws, optionally rounded to a coarse grid so that ties occur
inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, bool ties = false) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = ties ? std::round(g(rng) * 2.0) : g(rng);
    return v;
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) X(i, j) = g(rng);
    return X;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("driftlab_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace support
