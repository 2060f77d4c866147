#include "manifest.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "cns/version.hpp"

namespace cns::cli {

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("digest: cannot open " + path);
    uint64_t hash = 0xcbf29ce484222325ull;
    char buf[1 << 14];
    while (in) {
        in.read(buf, sizeof buf);
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ull;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
    return hex;
}

Manifest::Manifest(std::string command, nlohmann::json config_snapshot, uint64_t root_seed)
    : start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["config"] = std::move(config_snapshot);
    doc_["root_seed"] = root_seed;
    doc_["library_version"] = kLibraryVersion;
    doc_["inputs"] = nlohmann::json::object();
    doc_["outputs"] = nlohmann::json::object();
}

void Manifest::add_input(const std::string& path) { doc_["inputs"][path] = file_digest(path); }

void Manifest::add_output(const std::string& path) { doc_["outputs"][path] = file_digest(path); }

void Manifest::write(const std::string& out_dir) {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    doc_["duration_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
    const std::string path = out_dir + "/manifest.json";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("manifest: cannot open " + path);
    out << doc_.dump(2) << '\n';
}

}  // namespace cns::cli
