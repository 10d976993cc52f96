#include "pnpdm/image.hpp"

#include <cmath>
#include <string>

#include "pnpdm/error.hpp"

namespace pnpdm {

void require_finite(std::span<const double> values, const char* what) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]))
            throw InvalidInput(std::string(what) + ": non-finite value at index " + std::to_string(i));
    }
}

ImageGrid::ImageGrid(std::size_t height, std::size_t width, double value)
    : ImageGrid(height, width, std::vector<double>(height * width, value)) {}

ImageGrid::ImageGrid(std::size_t height, std::size_t width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
    if (height == 0 || width == 0)
        throw InvalidInput("image dimensions must be positive");
    if (data_.size() != height * width)
        throw InvalidInput("image data length " + std::to_string(data_.size()) + " != " + std::to_string(height) +
                           "x" + std::to_string(width));
    require_finite(data_, "image");
}

MeasurementVector::MeasurementVector(std::vector<double> values) : data(std::move(values)) {
    require_finite(data, "measurement");
}

MeasurementVector::MeasurementVector(std::size_t h, std::size_t w, std::vector<double> values)
    : height(h), width(w), data(std::move(values)) {
    if (h * w != data.size())
        throw InvalidInput("measurement shape does not match its length");
    require_finite(data, "measurement");
}

ImageGrid MeasurementVector::as_image() const {
    if (!shaped())
        throw InvalidInput("measurement has no image shape");
    return ImageGrid(height, width, data);
}

MeasurementVector MeasurementVector::from_image(const ImageGrid& img) {
    return MeasurementVector(img.height(), img.width(), img.values());
}

} // namespace pnpdm
