#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace cns::cli {

/// FNV-1a 64 digest of a file's bytes, hex-encoded.
std::string file_digest(const std::string& path);

/// Run record written once per output directory; digests let a re-run verify
/// that inputs and outputs are byte-identical.
class Manifest {
public:
    Manifest(std::string command, nlohmann::json config_snapshot, uint64_t root_seed);

    void add_input(const std::string& path);
    void add_output(const std::string& path);
    void write(const std::string& out_dir);

private:
    nlohmann::json doc_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace cns::cli
