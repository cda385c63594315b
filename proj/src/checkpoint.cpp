#include "nvf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace nvf {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'N', 'V', 'F', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_string(std::ostream& out, const std::string& s)
{
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path)
{
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
        throw IoError("truncated checkpoint " + path.string());
    return v;
}

std::string get_string(std::istream& in, const std::filesystem::path& path)
{
    const auto n = get<std::uint32_t>(in, path);
    if (n > (1u << 24))
        throw IoError("corrupt string length in checkpoint " + path.string());
    std::string s(n, '\0');
    if (!in.read(s.data(), n))
        throw IoError("truncated checkpoint " + path.string());
    return s;
}

CheckpointInfo read_header(std::istream& in, const std::filesystem::path& path)
{
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("not an NVF1 checkpoint: " + path.string());
    const auto version = get<std::uint32_t>(in, path);
    if (version != kVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    CheckpointInfo info;
    info.kind = get_string(in, path);
    info.config = get_string(in, path);
    const auto count = get<std::uint32_t>(in, path);
    for (std::uint32_t i = 0; i < count; ++i) {
        TensorInfo t;
        t.name = get_string(in, path);
        t.rows = get<std::uint32_t>(in, path);
        t.cols = get<std::uint32_t>(in, path);
        t.offset = get<std::uint64_t>(in, path);
        info.tensors.push_back(std::move(t));
    }
    return info;
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const std::string& kind, const std::string& config,
                     const nn::ParamList<float>& params)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write checkpoint " + path.string());
    out.write(kMagic, 4);
    put(out, kVersion);
    put_string(out, kind);
    put_string(out, config);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    std::uint64_t offset = 0;
    for (const auto* p : params) {
        put_string(out, p->name);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rows()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.cols()));
        put<std::uint64_t>(out, offset);
        offset += static_cast<std::uint64_t>(p->value.size()) * sizeof(float);
    }
    for (const auto* p : params)
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(p->value.size() * sizeof(float)));
    if (!out)
        throw IoError("failed writing checkpoint " + path.string());
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open checkpoint " + path.string());
    return read_header(in, path);
}

CheckpointInfo load_checkpoint(const std::filesystem::path& path, const std::string& kind,
                               const nn::ParamList<float>& params)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open checkpoint " + path.string());
    CheckpointInfo info = read_header(in, path);
    if (info.kind != kind)
        throw ShapeError("checkpoint holds a '" + info.kind + "' model, expected '" + kind + "'");
    if (info.tensors.size() != params.size())
        throw ShapeError("checkpoint has " + std::to_string(info.tensors.size()) + " tensors, model has " +
                         std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& t = info.tensors[i];
        const auto* p = params[i];
        if (t.name != p->name || t.rows != p->value.rows() || t.cols != p->value.cols())
            throw ShapeError("checkpoint tensor " + t.name + " [" + std::to_string(t.rows) + "x" +
                             std::to_string(t.cols) + "] does not match model tensor " + p->name + " [" +
                             std::to_string(p->value.rows()) + "x" + std::to_string(p->value.cols()) + "]");
    }
    const auto payload = in.tellg();
    for (std::size_t i = 0; i < params.size(); ++i) {
        in.seekg(payload + static_cast<std::streamoff>(info.tensors[i].offset));
        auto* p = params[i];
        if (!in.read(reinterpret_cast<char*>(p->value.data()),
                     static_cast<std::streamsize>(p->value.size() * sizeof(float))))
            throw IoError("truncated checkpoint payload " + path.string());
    }
    return info;
}

} // namespace nvf
