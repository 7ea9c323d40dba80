#pragma once

#include <map>
#include <string>
#include <vector>

#include "gasim/types.hpp"

namespace gasim {

/// Container of named real tensors used for parameter checkpoints.
///
/// File layout (little-endian):
///   magic "GASIMTEN" (8 bytes), format version u32, tensor count u32,
///   then per tensor: name length u32, name bytes, rank u32, dims u64[rank],
///   data as float64[product(dims)] in column-major order.
class TensorFile {
public:
    void put(const std::string& name, const Matrix& tensor) { tensors_[name] = tensor; }
    void put(const std::string& name, const Vector& tensor) {
        tensors_[name] = Matrix(tensor);
    }
    void put_scalar(const std::string& name, double value) {
        Matrix m(1, 1);
        m(0, 0) = value;
        tensors_[name] = m;
    }

    bool contains(const std::string& name) const { return tensors_.count(name) > 0; }
    const Matrix& get(const std::string& name) const;
    Vector get_vector(const std::string& name) const;
    double get_scalar(const std::string& name) const;

    const std::map<std::string, Matrix>& tensors() const { return tensors_; }

    void save(const std::string& path) const;
    static TensorFile load(const std::string& path);

private:
    std::map<std::string, Matrix> tensors_;
};

}  // namespace gasim
