#include "nvf/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace nvf {

namespace {

std::string next_token(std::istream& in)
{
    std::string tok;
    char c;
    while (in.get(c)) {
        if (c == '#') {
            std::string skip;
            std::getline(in, skip);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty())
                break;
            continue;
        }
        tok.push_back(c);
    }
    return tok;
}

std::uint8_t to_byte(float v)
{
    const float c = std::min(1.0f, std::max(0.0f, v));
    return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

} // namespace

void quantize_8bit(Image& image)
{
    for (Eigen::Index i = 0; i < image.rgb.size(); ++i)
        image.rgb.data()[i] = static_cast<float>(to_byte(image.rgb.data()[i])) / 255.0f;
}

void write_ppm(const std::filesystem::path& path, const Image& image)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string());
    out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    std::vector<char> row(static_cast<std::size_t>(image.width) * 3);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x)
            for (int k = 0; k < 3; ++k)
                row[static_cast<std::size_t>(x * 3 + k)] = static_cast<char>(to_byte(image.rgb(k, image.index(x, y))));
        out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
    if (!out)
        throw IoError("write failed for " + path.string());
}

Image read_ppm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    if (next_token(in) != "P6")
        throw IoError(path.string() + " is not a binary PPM");
    const int w = std::stoi(next_token(in));
    const int h = std::stoi(next_token(in));
    if (std::stoi(next_token(in)) != 255)
        throw IoError("only 8-bit PPM is supported");
    Image image(w, h);
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in)
        throw IoError("truncated PPM " + path.string());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int k = 0; k < 3; ++k)
                image.rgb(k, image.index(x, y)) =
                    static_cast<float>(buf[static_cast<std::size_t>((y * w + x) * 3 + k)]) / 255.0f;
    return image;
}

void write_pbm(const std::filesystem::path& path, const Mask& mask)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string());
    const auto w = mask.cols();
    out << "P4\n" << w << ' ' << mask.rows() << '\n';
    std::vector<unsigned char> row(static_cast<std::size_t>((w + 7) / 8));
    for (Eigen::Index y = 0; y < mask.rows(); ++y) {
        std::fill(row.begin(), row.end(), 0);
        for (Eigen::Index x = 0; x < w; ++x)
            if (mask(y, x))
                row[static_cast<std::size_t>(x / 8)] |= static_cast<unsigned char>(0x80u >> (x % 8));
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out)
        throw IoError("write failed for " + path.string());
}

Mask read_pbm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    if (next_token(in) != "P4")
        throw IoError(path.string() + " is not a binary PBM");
    const int w = std::stoi(next_token(in));
    const int h = std::stoi(next_token(in));
    Mask mask = Mask::Zero(h, w);
    std::vector<unsigned char> row(static_cast<std::size_t>((w + 7) / 8));
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!in)
            throw IoError("truncated PBM " + path.string());
        for (int x = 0; x < w; ++x)
            mask(y, x) = (row[static_cast<std::size_t>(x / 8)] >> (7 - x % 8)) & 1u;
    }
    return mask;
}

} // namespace nvf
