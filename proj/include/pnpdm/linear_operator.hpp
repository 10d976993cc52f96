#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pnpdm/image.hpp"

namespace pnpdm {

/// Linear map A: R^n -> R^m together with a singular system A = U D V^T.
///
/// Coordinates in the V basis are ordered so that the first min(m,n) carry the
/// singular values d_i (descending); the remainder span the null space of A.
class LinearOperatorSVD {
public:
    virtual ~LinearOperatorSVD() = default;

    virtual std::size_t input_dim() const = 0;
    virtual std::size_t output_dim() const = 0;
    /// d_1 >= ... >= d_r >= 0 with r = min(m, n).
    virtual std::span<const double> singular_values() const = 0;

    virtual void apply(std::span<const double> x, std::span<double> y) const = 0;
    virtual void adjoint(std::span<const double> y, std::span<double> x) const = 0;
    /// c = V^T x (length n)
    virtual void to_v(std::span<const double> x, std::span<double> c) const = 0;
    /// x = V c (length n)
    virtual void from_v(std::span<const double> c, std::span<double> x) const = 0;
    /// c = U^T y (length m)
    virtual void to_u(std::span<const double> y, std::span<double> c) const = 0;
    /// y = U c (length m)
    virtual void from_u(std::span<const double> c, std::span<double> y) const = 0;

    std::size_t rank_slots() const { return singular_values().size(); }

    std::vector<double> apply(std::span<const double> x) const;
    std::vector<double> adjoint(std::span<const double> y) const;
    std::vector<double> to_v(std::span<const double> x) const;
    std::vector<double> from_v(std::span<const double> c) const;

protected:
    void check_input(std::span<const double> x, const char* what) const;
    void check_output(std::span<const double> y, const char* what) const;
};

/// P_f: each output pixel is the mean of an f x f block of the high-resolution image.
///
/// The singular system is implicit: U = I, every singular value is 1/f, and V is, per
/// block, the Householder reflector sending e_1 to the normalized constant vector. The
/// first m V-coordinates are therefore f * (block mean) in low-resolution raster order;
/// block b's f^2 - 1 residual coordinates follow at m + b (f^2 - 1).
class BlockAverageOperator final : public LinearOperatorSVD {
public:
    BlockAverageOperator(std::size_t factor, std::size_t hr_height, std::size_t hr_width);

    std::size_t factor() const { return factor_; }
    std::size_t hr_height() const { return hr_height_; }
    std::size_t hr_width() const { return hr_width_; }
    std::size_t lr_height() const { return hr_height_ / factor_; }
    std::size_t lr_width() const { return hr_width_ / factor_; }

    std::size_t input_dim() const override { return hr_height_ * hr_width_; }
    std::size_t output_dim() const override { return lr_height() * lr_width(); }
    std::span<const double> singular_values() const override { return singular_values_; }

    void apply(std::span<const double> x, std::span<double> y) const override;
    void adjoint(std::span<const double> y, std::span<double> x) const override;
    void to_v(std::span<const double> x, std::span<double> c) const override;
    void from_v(std::span<const double> c, std::span<double> x) const override;
    void to_u(std::span<const double> y, std::span<double> c) const override;
    void from_u(std::span<const double> c, std::span<double> y) const override;

    using LinearOperatorSVD::adjoint;
    using LinearOperatorSVD::apply;
    using LinearOperatorSVD::from_v;
    using LinearOperatorSVD::to_v;

private:
    // Householder reflection of one block in place: b <- b - 2 w (w . b) / (w . w).
    void reflect(double* block) const;

    std::size_t factor_;
    std::size_t hr_height_;
    std::size_t hr_width_;
    std::vector<double> singular_values_;
    std::vector<double> householder_;
    double householder_scale_ = 0.0; // 2 / (w . w), 0 when f = 1
};

/// Explicit matrix with a numerically computed full SVD. Small instances only.
class DenseOperator final : public LinearOperatorSVD {
public:
    static constexpr std::size_t max_dim = 4096;

    explicit DenseOperator(Eigen::MatrixXd matrix);

    const Eigen::MatrixXd& matrix() const { return matrix_; }

    std::size_t input_dim() const override { return static_cast<std::size_t>(matrix_.cols()); }
    std::size_t output_dim() const override { return static_cast<std::size_t>(matrix_.rows()); }
    std::span<const double> singular_values() const override { return singular_values_; }

    void apply(std::span<const double> x, std::span<double> y) const override;
    void adjoint(std::span<const double> y, std::span<double> x) const override;
    void to_v(std::span<const double> x, std::span<double> c) const override;
    void from_v(std::span<const double> c, std::span<double> x) const override;
    void to_u(std::span<const double> y, std::span<double> c) const override;
    void from_u(std::span<const double> c, std::span<double> y) const override;

    using LinearOperatorSVD::adjoint;
    using LinearOperatorSVD::apply;
    using LinearOperatorSVD::from_v;
    using LinearOperatorSVD::to_v;

private:
    Eigen::MatrixXd matrix_;
    Eigen::MatrixXd u_;
    Eigen::MatrixXd v_;
    std::vector<double> singular_values_;
};

DenseOperator dense_operator_from_matrix(const Eigen::MatrixXd& entries);

/// Materialized A, U, V and d of any operator, obtained by probing with unit vectors.
struct DenseFactors {
    Eigen::MatrixXd a;
    Eigen::MatrixXd u;
    Eigen::MatrixXd v;
    Eigen::VectorXd d;

    /// U D V^T with D the m x n diagonal of d.
    Eigen::MatrixXd reconstruct() const;
};
DenseFactors materialize(const LinearOperatorSVD& op);

/// y = P_f x for an image with dims matching the operator.
MeasurementVector block_average_apply(const BlockAverageOperator& op, const ImageGrid& x);
ImageGrid block_average_adjoint(const BlockAverageOperator& op, const MeasurementVector& y);

enum class Direction { to, from };
ImageGrid block_average_v_basis(const BlockAverageOperator& op, const ImageGrid& x, Direction direction);

/// Every f-th pixel (top-left of each block); the mismatched-operator alternative to P_f.
MeasurementVector decimate(const ImageGrid& x, std::size_t factor);

/// Sigma = sigma_y^2 I; sigma_y = 0 is noiseless.
struct NoiseModel {
    explicit NoiseModel(double sigma_y = 0.0);
    double sigma_y;
};

/// y = A x + sigma_y xi with xi ~ N(0, I) from a generator seeded with `seed`.
std::vector<double> degrade(std::span<const double> x, const LinearOperatorSVD& op, const NoiseModel& noise,
                            std::uint64_t seed);
MeasurementVector degrade(const ImageGrid& x, const BlockAverageOperator& op, const NoiseModel& noise,
                          std::uint64_t seed);

} // namespace pnpdm
