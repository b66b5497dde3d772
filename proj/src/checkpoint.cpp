#include "cystonet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace cysto {

namespace {

constexpr char kMagic[4] = {'C', 'Y', 'N', 'C'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) raise(ErrorKind::Io, "checkpoint truncated");
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    const auto n = get<std::uint32_t>(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) raise(ErrorKind::Io, "checkpoint truncated");
    return s;
}

void put_tensors(std::ostream& out, const NamedTensors& tensors) {
    put<std::uint64_t>(out, tensors.size());
    for (const auto& [name, t] : tensors) {
        put_string(out, name);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.ndim()));
        for (int d : t.shape()) put<std::int32_t>(out, d);
        put<std::uint8_t>(out, t.requires_grad() ? 1 : 0);
        const auto& data = t.data();
        const std::size_t bytes = data.size() * sizeof(double);
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(bytes));
        put<std::uint64_t>(out, fnv1a(data.data(), bytes));
    }
}

NamedTensors get_tensors(std::istream& in) {
    NamedTensors tensors;
    const auto count = get<std::uint64_t>(in);
    tensors.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string name = get_string(in);
        const auto rank = get<std::uint32_t>(in);
        Shape shape(rank);
        for (auto& d : shape) d = get<std::int32_t>(in);
        const bool grad = get<std::uint8_t>(in) != 0;
        std::vector<double> data(shape_numel(shape));
        const std::size_t bytes = data.size() * sizeof(double);
        in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
        if (!in) raise(ErrorKind::Io, "checkpoint truncated in tensor '" + name + "'");
        if (get<std::uint64_t>(in) != fnv1a(data.data(), bytes))
            raise(ErrorKind::Io, "checksum mismatch in tensor '" + name + "'");
        tensors.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(data), grad));
    }
    return tensors;
}

std::string encode_kv(const KvPairs& kv) {
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

KvPairs decode_kv(const std::string& text) {
    KvPairs kv;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        const std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        const auto sep = line.find(" = ");
        if (sep == std::string::npos) raise(ErrorKind::Io, "malformed extra record: " + line);
        kv.emplace_back(line.substr(0, sep), line.substr(sep + 3));
    }
    return kv;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& config, const NamedTensors& tensors,
                     const KvPairs* extra_kv, const NamedTensors* extra_tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::Io, "cannot create checkpoint: " + path);
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put_string(out, encode_model_config(config));
    put_tensors(out, tensors);
    const bool has_extra = extra_kv || extra_tensors;
    put<std::uint8_t>(out, has_extra ? 1 : 0);
    if (has_extra) {
        static const KvPairs empty_kv;
        static const NamedTensors empty_tensors;
        put_string(out, encode_kv(extra_kv ? *extra_kv : empty_kv));
        put_tensors(out, extra_tensors ? *extra_tensors : empty_tensors);
    }
    out.flush();
    if (!out) raise(ErrorKind::Io, "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::Io, "cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) raise(ErrorKind::Io, "not a checkpoint file: " + path);
    if (get<std::uint32_t>(in) != kVersion) raise(ErrorKind::Io, "unsupported checkpoint version: " + path);
    Checkpoint ck;
    ck.config = decode_model_config(get_string(in));
    ck.tensors = get_tensors(in);
    ck.has_extra = get<std::uint8_t>(in) != 0;
    if (ck.has_extra) {
        ck.extra_kv = decode_kv(get_string(in));
        ck.extra_tensors = get_tensors(in);
    }
    return ck;
}

void save_model(const std::string& path, const Model& m) { save_checkpoint(path, m.config, m.named_state()); }

void copy_state_into(Model& m, const NamedTensors& tensors) {
    std::map<std::string, Tensor> loaded;
    for (const auto& [name, t] : tensors) loaded.emplace(name, t);
    NamedTensors state = m.named_state();
    if (state.size() != loaded.size())
        raise(ErrorKind::InvalidArgument, "checkpoint holds " + std::to_string(loaded.size()) +
                                              " tensors, model expects " + std::to_string(state.size()));
    for (auto& [name, t] : state) {
        auto it = loaded.find(name);
        if (it == loaded.end()) raise(ErrorKind::InvalidArgument, "checkpoint is missing tensor '" + name + "'");
        if (it->second.shape() != t.shape())
            raise(ErrorKind::InvalidArgument, "shape mismatch for tensor '" + name + "'");
        t.mutable_data() = it->second.data();
    }
}

Model load_model_checkpoint(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    Model m = build_model(ck.config);
    copy_state_into(m, ck.tensors);
    return m;
}

}  // namespace cysto
