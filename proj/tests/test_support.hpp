#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "simdis/metrics.hpp"
#include "simdis/random.hpp"

namespace support {

/// Scores on a coarse grid (so ties are common) and random nonempty truths.
inline simdis::metrics::Predictions random_predictions(simdis::Rng& rng, std::size_t samples, std::size_t classes) {
    simdis::metrics::Predictions p;
    p.scores.resize(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(classes));
    std::uniform_int_distribution<int> grid(0, 10);
    for (Eigen::Index i = 0; i < p.scores.rows(); ++i) {
        for (Eigen::Index k = 0; k < p.scores.cols(); ++k) p.scores(i, k) = grid(rng) / 10.0;
    }
    for (std::size_t i = 0; i < samples; ++i) {
        p.truths.push_back(simdis::random_label_set(rng, classes, std::min<std::size_t>(classes, 3)));
    }
    return p;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("simdis_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
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

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

struct CliResult {
    int status = -1;
    std::string out;
    std::string err;
};

/// Runs the built `simdis` executable with `args` (already shell-quoted).
inline CliResult run_cli(const std::string& args, const std::filesystem::path& scratch) {
    const auto out = scratch / "cli_stdout.txt";
    const auto err = scratch / "cli_stderr.txt";
    const std::string cmd =
        std::string("\"") + SIMDIS_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
    const int raw = std::system(cmd.c_str());
    CliResult r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = read_file(out);
    r.err = read_file(err);
    return r;
}

}  // namespace support
