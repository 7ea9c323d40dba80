#include "gasim/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace gasim {

namespace {

constexpr char kMagic[8] = {'G', 'A', 'S', 'I', 'M', 'T', 'E', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw Error("TensorFile: truncated file");
    return value;
}

}  // namespace

const Matrix& TensorFile::get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw Error("TensorFile: missing tensor '" + name + "'");
    return it->second;
}

Vector TensorFile::get_vector(const std::string& name) const {
    const Matrix& m = get(name);
    if (m.cols() != 1) throw Error("TensorFile: tensor '" + name + "' is not a vector");
    return m.col(0);
}

double TensorFile::get_scalar(const std::string& name) const {
    const Matrix& m = get(name);
    if (m.size() != 1) throw Error("TensorFile: tensor '" + name + "' is not a scalar");
    return m(0, 0);
}

void TensorFile::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("TensorFile: cannot open " + path + " for writing");
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint32_t>(tensors_.size()));
    for (const auto& [name, tensor] : tensors_) {
        write_pod(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod(out, static_cast<std::uint32_t>(2));
        write_pod(out, static_cast<std::uint64_t>(tensor.rows()));
        write_pod(out, static_cast<std::uint64_t>(tensor.cols()));
        out.write(reinterpret_cast<const char*>(tensor.data()),
                  static_cast<std::streamsize>(sizeof(double) * tensor.size()));
    }
    if (!out) throw Error("TensorFile: write failed for " + path);
}

TensorFile TensorFile::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("TensorFile: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw Error("TensorFile: bad magic in " + path);
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kVersion) throw Error("TensorFile: unsupported format version");
    const auto count = read_pod<std::uint32_t>(in);

    TensorFile file;
    for (std::uint32_t t = 0; t < count; ++t) {
        const auto name_len = read_pod<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rank = read_pod<std::uint32_t>(in);
        if (rank != 2) throw Error("TensorFile: only rank-2 tensors are supported");
        const auto rows = read_pod<std::uint64_t>(in);
        const auto cols = read_pod<std::uint64_t>(in);
        Matrix tensor(rows, cols);
        in.read(reinterpret_cast<char*>(tensor.data()),
                static_cast<std::streamsize>(sizeof(double) * tensor.size()));
        if (!in) throw Error("TensorFile: truncated tensor data in " + path);
        file.tensors_.emplace(std::move(name), std::move(tensor));
    }
    return file;
}

}  // namespace gasim
