#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "stylediff/nn.hpp"
#include "stylediff/tensor.hpp"

namespace stylediff {

// Binary container: magic + version header, one JSON metadata block, then
// named float64 tensors in insertion order. Raw little-endian doubles, so a
// save/load round trip is bit-exact and serialization is deterministic.
class Checkpoint {
public:
    static constexpr char magic[8] = {'S', 'D', 'C', 'K', 'P', 'T', '0', '\n'};
    static constexpr uint8_t format_version = 1;

    nlohmann::json meta;

    void add(const std::string& name, Tensor t);
    bool has(const std::string& name) const;
    const Tensor& get(const std::string& name) const;  // contract error if missing
    const std::vector<std::pair<std::string, Tensor>>& tensors() const { return tensors_; }

    void add_store(const std::string& prefix, const ParamStore& store);
    void load_store(const std::string& prefix, ParamStore& store) const;

    // Atomic: writes to <path>.tmp then renames.
    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

private:
    std::vector<std::pair<std::string, Tensor>> tensors_;
    std::map<std::string, size_t> index_;
};

}  // namespace stylediff
