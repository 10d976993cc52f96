#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pnpdm {

/// Row-major grayscale image; values are nominally in [0,1] and always finite.
class ImageGrid {
public:
    ImageGrid() = default;
    /// Constant image.
    ImageGrid(std::size_t height, std::size_t width, double value = 0.0);
    ImageGrid(std::size_t height, std::size_t width, std::vector<double> data);

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double operator()(std::size_t row, std::size_t col) const { return data_[row * width_ + col]; }
    double& operator()(std::size_t row, std::size_t col) { return data_[row * width_ + col]; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    bool same_shape(const ImageGrid& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_;
    }

    friend bool operator==(const ImageGrid&, const ImageGrid&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> data_;
};

/// Measurement y. Carries the low-resolution shape when it came from an imaging operator
/// (height = width = 0 otherwise).
struct MeasurementVector {
    MeasurementVector() = default;
    explicit MeasurementVector(std::vector<double> values);
    MeasurementVector(std::size_t height, std::size_t width, std::vector<double> values);

    std::size_t length() const noexcept { return data.size(); }
    bool shaped() const noexcept { return height * width == data.size() && height > 0; }

    /// Reinterpret as an image; requires a shape.
    ImageGrid as_image() const;
    static MeasurementVector from_image(const ImageGrid& img);

    friend bool operator==(const MeasurementVector&, const MeasurementVector&) = default;

    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> data;
};

/// Throws InvalidInput naming `what` if any value is NaN or infinite.
void require_finite(std::span<const double> values, const char* what);

} // namespace pnpdm
