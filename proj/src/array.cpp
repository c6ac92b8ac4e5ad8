#include "dekt/array.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dekt {

static int checked_product(const std::vector<int>& shape) {
    long long n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("Array: nonpositive dimension " + std::to_string(d));
        n *= d;
    }
    return static_cast<int>(n);
}

Array::Array(std::vector<int> s, double fill_value)
    : shape(std::move(s)), data(static_cast<std::size_t>(checked_product(shape)), fill_value) {}

Array::Array(std::vector<int> s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    if (checked_product(shape) != static_cast<int>(data.size()))
        throw std::invalid_argument("Array: shape/data length mismatch");
}

Array Array::scalar(double v) { return Array({1}, std::vector<double>{v}); }

Array Array::vec(std::vector<double> values) {
    int n = static_cast<int>(values.size());
    return Array({n}, std::move(values));
}

int Array::size() const { return static_cast<int>(data.size()); }

bool Array::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

void Array::fill(double v) {
    for (double& x : data) x = v;
}

std::string Array::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

} // namespace dekt
