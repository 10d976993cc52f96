#include "pnpdm/linear_operator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pnpdm/error.hpp"
#include "pnpdm/rng.hpp"

namespace pnpdm {

void LinearOperatorSVD::check_input(std::span<const double> x, const char* what) const {
    if (x.size() != input_dim())
        throw InvalidInput(std::string(what) + ": expected length " + std::to_string(input_dim()) + ", got " +
                           std::to_string(x.size()));
}

void LinearOperatorSVD::check_output(std::span<const double> y, const char* what) const {
    if (y.size() != output_dim())
        throw InvalidInput(std::string(what) + ": expected length " + std::to_string(output_dim()) + ", got " +
                           std::to_string(y.size()));
}

std::vector<double> LinearOperatorSVD::apply(std::span<const double> x) const {
    std::vector<double> y(output_dim());
    apply(x, y);
    return y;
}

std::vector<double> LinearOperatorSVD::adjoint(std::span<const double> y) const {
    std::vector<double> x(input_dim());
    adjoint(y, x);
    return x;
}

std::vector<double> LinearOperatorSVD::to_v(std::span<const double> x) const {
    std::vector<double> c(input_dim());
    to_v(x, c);
    return c;
}

std::vector<double> LinearOperatorSVD::from_v(std::span<const double> c) const {
    std::vector<double> x(input_dim());
    from_v(c, x);
    return x;
}

// ---------------------------------------------------------------------------------------
// BlockAverageOperator

BlockAverageOperator::BlockAverageOperator(std::size_t factor, std::size_t hr_height, std::size_t hr_width)
    : factor_(factor), hr_height_(hr_height), hr_width_(hr_width) {
    if (factor == 0)
        throw InvalidInput("downsampling factor must be positive");
    if (hr_height == 0 || hr_width == 0)
        throw InvalidInput("image dimensions must be positive");
    if (hr_height % factor != 0 || hr_width % factor != 0)
        throw InvalidInput("image dimensions " + std::to_string(hr_height) + "x" + std::to_string(hr_width) +
                           " are not divisible by factor " + std::to_string(factor));

    const double f = static_cast<double>(factor);
    singular_values_.assign(output_dim(), 1.0 / f);

    // w = e_1 - 1/f * ones, so that I - 2 w w^T / (w.w) maps e_1 onto the unit constant vector.
    const std::size_t block = factor * factor;
    householder_.assign(block, -1.0 / f);
    householder_[0] = 1.0 - 1.0 / f;
    if (factor > 1) {
        double ww = 0.0;
        for (double w : householder_)
            ww += w * w;
        householder_scale_ = 2.0 / ww;
    }
}

void BlockAverageOperator::reflect(double* b) const {
    if (householder_scale_ == 0.0)
        return;
    const std::size_t block = householder_.size();
    double proj = 0.0;
    for (std::size_t j = 0; j < block; ++j)
        proj += householder_[j] * b[j];
    proj *= householder_scale_;
    for (std::size_t j = 0; j < block; ++j)
        b[j] -= proj * householder_[j];
}

void BlockAverageOperator::apply(std::span<const double> x, std::span<double> y) const {
    check_input(x, "block_average_apply");
    check_output(y, "block_average_apply");
    const std::size_t f = factor_, lw = lr_width();
    const double inv_block = 1.0 / static_cast<double>(f * f);
    for (std::size_t br = 0; br < lr_height(); ++br) {
        for (std::size_t bc = 0; bc < lw; ++bc) {
            const double* origin = x.data() + br * f * hr_width_ + bc * f;
            // Offsets from the first pixel keep the mean of a constant block exact.
            const double first = origin[0];
            double acc = 0.0;
            for (std::size_t i = 0; i < f; ++i)
                for (std::size_t j = 0; j < f; ++j)
                    acc += origin[i * hr_width_ + j] - first;
            y[br * lw + bc] = first + acc * inv_block;
        }
    }
}

void BlockAverageOperator::adjoint(std::span<const double> y, std::span<double> x) const {
    check_output(y, "block_average_adjoint");
    check_input(x, "block_average_adjoint");
    const std::size_t f = factor_, lw = lr_width();
    const double inv_block = 1.0 / static_cast<double>(f * f);
    for (std::size_t r = 0; r < hr_height_; ++r)
        for (std::size_t c = 0; c < hr_width_; ++c)
            x[r * hr_width_ + c] = y[(r / f) * lw + c / f] * inv_block;
}

void BlockAverageOperator::to_v(std::span<const double> x, std::span<double> c) const {
    check_input(x, "block_average_v_basis");
    check_input(c, "block_average_v_basis");
    const std::size_t f = factor_, block = f * f, lw = lr_width(), m = output_dim();
    std::vector<double> buf(block);
    for (std::size_t br = 0; br < lr_height(); ++br) {
        for (std::size_t bc = 0; bc < lw; ++bc) {
            const std::size_t b = br * lw + bc;
            const double* origin = x.data() + br * f * hr_width_ + bc * f;
            for (std::size_t i = 0; i < f; ++i)
                for (std::size_t j = 0; j < f; ++j)
                    buf[i * f + j] = origin[i * hr_width_ + j];
            reflect(buf.data());
            c[b] = buf[0];
            std::copy(buf.begin() + 1, buf.end(), c.begin() + static_cast<std::ptrdiff_t>(m + b * (block - 1)));
        }
    }
}

void BlockAverageOperator::from_v(std::span<const double> c, std::span<double> x) const {
    check_input(c, "block_average_v_basis");
    check_input(x, "block_average_v_basis");
    const std::size_t f = factor_, block = f * f, lw = lr_width(), m = output_dim();
    std::vector<double> buf(block);
    for (std::size_t br = 0; br < lr_height(); ++br) {
        for (std::size_t bc = 0; bc < lw; ++bc) {
            const std::size_t b = br * lw + bc;
            buf[0] = c[b];
            const auto residual = c.begin() + static_cast<std::ptrdiff_t>(m + b * (block - 1));
            std::copy(residual, residual + static_cast<std::ptrdiff_t>(block - 1), buf.begin() + 1);
            reflect(buf.data());
            double* origin = x.data() + br * f * hr_width_ + bc * f;
            for (std::size_t i = 0; i < f; ++i)
                for (std::size_t j = 0; j < f; ++j)
                    origin[i * hr_width_ + j] = buf[i * f + j];
        }
    }
}

void BlockAverageOperator::to_u(std::span<const double> y, std::span<double> c) const {
    check_output(y, "to_u");
    check_output(c, "to_u");
    std::copy(y.begin(), y.end(), c.begin());
}

void BlockAverageOperator::from_u(std::span<const double> c, std::span<double> y) const {
    check_output(c, "from_u");
    check_output(y, "from_u");
    std::copy(c.begin(), c.end(), y.begin());
}

// ---------------------------------------------------------------------------------------
// DenseOperator

DenseOperator::DenseOperator(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
    if (matrix_.rows() == 0 || matrix_.cols() == 0)
        throw InvalidInput("dense operator must be non-empty");
    if (static_cast<std::size_t>(matrix_.rows()) > max_dim || static_cast<std::size_t>(matrix_.cols()) > max_dim)
        throw InvalidInput("dense operator larger than " + std::to_string(max_dim));
    if (!matrix_.allFinite())
        throw InvalidInput("dense operator has non-finite entries");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(matrix_, Eigen::ComputeFullU | Eigen::ComputeFullV);
    u_ = svd.matrixU();
    v_ = svd.matrixV();
    const Eigen::VectorXd& s = svd.singularValues();
    singular_values_.assign(s.data(), s.data() + s.size());
}

DenseOperator dense_operator_from_matrix(const Eigen::MatrixXd& entries) { return DenseOperator(entries); }

void DenseOperator::apply(std::span<const double> x, std::span<double> y) const {
    check_input(x, "apply");
    check_output(y, "apply");
    Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())) =
        matrix_ * Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

void DenseOperator::adjoint(std::span<const double> y, std::span<double> x) const {
    check_output(y, "adjoint");
    check_input(x, "adjoint");
    Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())) =
        matrix_.transpose() * Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
}

void DenseOperator::to_v(std::span<const double> x, std::span<double> c) const {
    check_input(x, "to_v");
    check_input(c, "to_v");
    Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size())) =
        v_.transpose() * Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

void DenseOperator::from_v(std::span<const double> c, std::span<double> x) const {
    check_input(c, "from_v");
    check_input(x, "from_v");
    Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())) =
        v_ * Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
}

void DenseOperator::to_u(std::span<const double> y, std::span<double> c) const {
    check_output(y, "to_u");
    check_output(c, "to_u");
    Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size())) =
        u_.transpose() * Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
}

void DenseOperator::from_u(std::span<const double> c, std::span<double> y) const {
    check_output(c, "from_u");
    check_output(y, "from_u");
    Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())) =
        u_ * Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
}

// ---------------------------------------------------------------------------------------

Eigen::MatrixXd DenseFactors::reconstruct() const {
    Eigen::MatrixXd dmat = Eigen::MatrixXd::Zero(u.cols(), v.cols());
    for (Eigen::Index i = 0; i < d.size(); ++i)
        dmat(i, i) = d(i);
    return u * dmat * v.transpose();
}

DenseFactors materialize(const LinearOperatorSVD& op) {
    const auto n = static_cast<Eigen::Index>(op.input_dim());
    const auto m = static_cast<Eigen::Index>(op.output_dim());
    DenseFactors out{Eigen::MatrixXd(m, n), Eigen::MatrixXd(m, m), Eigen::MatrixXd(n, n), Eigen::VectorXd()};
    std::vector<double> e(static_cast<std::size_t>(n)), col_n(static_cast<std::size_t>(n)),
        col_m(static_cast<std::size_t>(m)), em(static_cast<std::size_t>(m));
    for (Eigen::Index j = 0; j < n; ++j) {
        std::fill(e.begin(), e.end(), 0.0);
        e[static_cast<std::size_t>(j)] = 1.0;
        op.apply(e, col_m);
        out.a.col(j) = Eigen::Map<Eigen::VectorXd>(col_m.data(), m);
        op.from_v(e, col_n);
        out.v.col(j) = Eigen::Map<Eigen::VectorXd>(col_n.data(), n);
    }
    for (Eigen::Index j = 0; j < m; ++j) {
        std::fill(em.begin(), em.end(), 0.0);
        em[static_cast<std::size_t>(j)] = 1.0;
        op.from_u(em, col_m);
        out.u.col(j) = Eigen::Map<Eigen::VectorXd>(col_m.data(), m);
    }
    const auto sv = op.singular_values();
    out.d = Eigen::Map<const Eigen::VectorXd>(sv.data(), static_cast<Eigen::Index>(sv.size()));
    return out;
}

namespace {

void check_image(const BlockAverageOperator& op, const ImageGrid& x) {
    if (x.height() != op.hr_height() || x.width() != op.hr_width())
        throw InvalidInput("image is " + std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                           ", operator expects " + std::to_string(op.hr_height()) + "x" +
                           std::to_string(op.hr_width()));
}

} // namespace

MeasurementVector block_average_apply(const BlockAverageOperator& op, const ImageGrid& x) {
    check_image(op, x);
    return MeasurementVector(op.lr_height(), op.lr_width(), op.apply(x.data()));
}

ImageGrid block_average_adjoint(const BlockAverageOperator& op, const MeasurementVector& y) {
    if (y.length() != op.output_dim())
        throw InvalidInput("measurement length " + std::to_string(y.length()) + " != " +
                           std::to_string(op.output_dim()));
    return ImageGrid(op.hr_height(), op.hr_width(), op.adjoint(y.data));
}

ImageGrid block_average_v_basis(const BlockAverageOperator& op, const ImageGrid& x, Direction direction) {
    check_image(op, x);
    auto out = direction == Direction::to ? op.to_v(x.data()) : op.from_v(x.data());
    return ImageGrid(x.height(), x.width(), std::move(out));
}

MeasurementVector decimate(const ImageGrid& x, std::size_t factor) {
    if (factor == 0 || x.height() % factor != 0 || x.width() % factor != 0)
        throw InvalidInput("image dimensions not divisible by the decimation factor");
    const std::size_t h = x.height() / factor, w = x.width() / factor;
    std::vector<double> out(h * w);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
            out[r * w + c] = x(r * factor, c * factor);
    return MeasurementVector(h, w, std::move(out));
}

NoiseModel::NoiseModel(double s) : sigma_y(s) {
    if (!(s >= 0.0) || !std::isfinite(s))
        throw InvalidInput("noise standard deviation must be finite and >= 0");
}

std::vector<double> degrade(std::span<const double> x, const LinearOperatorSVD& op, const NoiseModel& noise,
                            std::uint64_t seed) {
    std::vector<double> y = op.apply(x);
    if (noise.sigma_y > 0.0) {
        Rng rng(seed);
        for (double& v : y)
            v += noise.sigma_y * rng.normal();
    }
    return y;
}

MeasurementVector degrade(const ImageGrid& x, const BlockAverageOperator& op, const NoiseModel& noise,
                          std::uint64_t seed) {
    check_image(op, x);
    return MeasurementVector(op.lr_height(), op.lr_width(), degrade(x.data(), op, noise, seed));
}

} // namespace pnpdm
