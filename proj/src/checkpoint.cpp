#include "midgap/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace midgap {

namespace {

constexpr char kMagic[8] = {'M', 'I', 'D', 'G', 'A', 'P', '0', '1'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is, const std::string& path) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError(path + ": truncated checkpoint");
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_pod<std::uint64_t>(os, s.size());
    os.write(s.data(), s.size());
}

std::string read_string(std::istream& is, const std::string& path) {
    auto n = read_pod<std::uint64_t>(is, path);
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) throw FormatError(path + ": truncated checkpoint");
    return s;
}

}  // namespace

Tensor Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw ConfigError("checkpoint is missing tensor: " + name);
}

bool Checkpoint::has(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return true;
    return false;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint " + path);
    os.write(kMagic, sizeof(kMagic));
    write_pod(os, kVersion);
    write_string(os, ck.config.serialize());
    write_pod<std::int64_t>(os, ck.iteration);
    write_string(os, ck.rng_state);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(ck.tensors.size()));
    std::uint64_t offset = 0;
    for (const auto& [name, t] : ck.tensors) {
        write_string(os, name);
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape().size()));
        for (int d : t.shape()) write_pod<std::int64_t>(os, d);
        write_pod<std::uint64_t>(os, offset);
        offset += t.size() * sizeof(double);
    }
    write_pod<std::uint64_t>(os, offset);
    for (const auto& [name, t] : ck.tensors)
        os.write(reinterpret_cast<const char*>(t.values().data()), t.size() * sizeof(double));
    if (!os) throw IoError("short write to checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read checkpoint " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw FormatError(path + ": not a MIDGAP01 checkpoint");
    auto version = read_pod<std::uint32_t>(is, path);
    if (version != kVersion)
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.config = parse_config_text(read_string(is, path));
    ck.iteration = read_pod<std::int64_t>(is, path);
    ck.rng_state = read_string(is, path);
    auto count = read_pod<std::uint32_t>(is, path);
    struct Entry {
        std::string name;
        Shape shape;
        std::uint64_t offset;
    };
    std::vector<Entry> entries;
    for (std::uint32_t i = 0; i < count; ++i) {
        Entry e;
        e.name = read_string(is, path);
        auto ndim = read_pod<std::uint32_t>(is, path);
        for (std::uint32_t d = 0; d < ndim; ++d)
            e.shape.push_back(static_cast<int>(read_pod<std::int64_t>(is, path)));
        e.offset = read_pod<std::uint64_t>(is, path);
        entries.push_back(std::move(e));
    }
    auto blob_len = read_pod<std::uint64_t>(is, path);
    std::vector<char> blob(blob_len);
    is.read(blob.data(), blob_len);
    if (!is) throw FormatError(path + ": truncated tensor blob");
    for (auto& e : entries) {
        long n = numel(e.shape);
        if (e.offset + n * sizeof(double) > blob_len)
            throw FormatError(path + ": tensor " + e.name + " overruns blob");
        std::vector<double> v(n);
        std::memcpy(v.data(), blob.data() + e.offset, n * sizeof(double));
        ck.tensors.emplace_back(e.name, Tensor::from(e.shape, std::move(v)));
    }
    return ck;
}

}  // namespace midgap
