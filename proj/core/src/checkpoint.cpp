#include "stylediff/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "stylediff/errors.hpp"

namespace stylediff {

namespace {

void write_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void Checkpoint::add(const std::string& name, Tensor t) {
    if (index_.count(name)) throw_contract("checkpoint: duplicate tensor name " + name);
    index_[name] = tensors_.size();
    tensors_.emplace_back(name, std::move(t));
}

bool Checkpoint::has(const std::string& name) const { return index_.count(name) > 0; }

const Tensor& Checkpoint::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw_contract("checkpoint: missing tensor " + name);
    return tensors_[it->second].second;
}

void Checkpoint::add_store(const std::string& prefix, const ParamStore& store) {
    for (const auto& p : store.all()) add(prefix + p->name, p->value.clone());
}

void Checkpoint::load_store(const std::string& prefix, ParamStore& store) const {
    std::map<std::string, Tensor> named;
    for (const auto& p : store.all()) named[p->name] = get(prefix + p->name);
    store.load(named);
}

void Checkpoint::save(const std::filesystem::path& path) const {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw_io("checkpoint: cannot open " + tmp.string() + " for writing");
        os.write(magic, sizeof(magic));
        os.put(static_cast<char>(format_version));
        std::string meta_str = meta.dump();
        write_u64(os, meta_str.size());
        os.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
        write_u64(os, tensors_.size());
        for (const auto& [name, t] : tensors_) {
            write_u64(os, name.size());
            os.write(name.data(), static_cast<std::streamsize>(name.size()));
            os.put(static_cast<char>(t.ndim()));
            for (int i = 0; i < t.ndim(); ++i) write_u64(os, static_cast<uint64_t>(t.dim(i)));
            os.write(reinterpret_cast<const char*>(t.data()),
                     static_cast<std::streamsize>(t.size() * sizeof(double)));
        }
        if (!os) throw_io("checkpoint: write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw_io("checkpoint: rename failed: " + ec.message());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw_io("checkpoint: cannot open " + path.string());
    char m[sizeof(magic)];
    is.read(m, sizeof(magic));
    if (!is || std::memcmp(m, magic, sizeof(magic)) != 0)
        throw_io("checkpoint: bad magic in " + path.string());
    int version = is.get();
    if (version != format_version) throw_io("checkpoint: unsupported format version");

    Checkpoint ckpt;
    uint64_t meta_len = read_u64(is);
    std::string meta_str(meta_len, '\0');
    is.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
    ckpt.meta = nlohmann::json::parse(meta_str, nullptr, /*allow_exceptions=*/false);
    if (ckpt.meta.is_discarded()) throw_io("checkpoint: corrupt metadata block");

    uint64_t count = read_u64(is);
    for (uint64_t i = 0; i < count; ++i) {
        uint64_t name_len = read_u64(is);
        std::string name(name_len, '\0');
        is.read(name.data(), static_cast<std::streamsize>(name_len));
        int ndim = is.get();
        if (ndim < 1 || ndim > 4) throw_io("checkpoint: corrupt tensor rank");
        std::vector<int> shape(static_cast<size_t>(ndim));
        for (auto& d : shape) d = static_cast<int>(read_u64(is));
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!is) throw_io("checkpoint: truncated tensor data");
        ckpt.add(name, std::move(t));
    }
    return ckpt;
}

}  // namespace stylediff
