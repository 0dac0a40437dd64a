#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace streamvae::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape) noexcept;
std::string shape_str(const Shape& shape);

/// Dense row-major float64 array.
///
/// Most operations view a tensor as a matrix: `cols()` is the last axis and
/// `rows()` the product of all leading axes. Scalars use shape {1}.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
        return Tensor({rows, cols}, fill);
    }
    /// Row-major literal, e.g. `Tensor::from_rows({{1, 2}, {3, 4}})`.
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t cols() const noexcept { return shape_.empty() ? 1 : shape_.back(); }
    [[nodiscard]] std::size_t rows() const noexcept { return cols() == 0 ? 0 : size() / cols(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] double* ptr() noexcept { return data_.data(); }
    [[nodiscard]] const double* ptr() const noexcept { return data_.data(); }
    [[nodiscard]] std::vector<double>& storage() noexcept { return data_; }
    [[nodiscard]] const std::vector<double>& storage() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }
    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

    [[nodiscard]] std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols(), cols()}; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols(), cols()};
    }

    /// Same data, new shape of equal size.
    [[nodiscard]] Tensor reshaped(Shape shape) const;
    void fill(double v) noexcept;
    [[nodiscard]] bool all_finite() const noexcept;
    [[nodiscard]] double item() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

}  // namespace streamvae::nn
