#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace dekt {

// Dense row-major double array. Rank 0 (scalar), 1 or 2 in practice.
struct Array {
    std::vector<int> shape;
    std::vector<double> data;

    Array() = default;
    explicit Array(std::vector<int> s, double fill = 0.0);
    Array(std::vector<int> s, std::vector<double> values);

    static Array scalar(double v);
    static Array vec(std::vector<double> values);

    int size() const;
    int rank() const { return static_cast<int>(shape.size()); }
    // 2-D accessors; rows()/cols() assume rank 2
    int rows() const { return shape[0]; }
    int cols() const { return shape[1]; }
    double& at(int i) { return data[static_cast<std::size_t>(i)]; }
    double at(int i) const { return data[static_cast<std::size_t>(i)]; }
    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

    bool same_shape(const Array& other) const { return shape == other.shape; }
    bool all_finite() const;
    void fill(double v);
    std::string shape_str() const;
};

} // namespace dekt
