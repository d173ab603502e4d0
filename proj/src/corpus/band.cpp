#include "ielts/corpus/band.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ielts/common/error.hpp"

namespace ielts::corpus {

Band Band::from_lattice(double value) {
    if (!std::isfinite(value) || value < kMinBand || value > kMaxBand) {
        throw InvalidInput("band out of range: " + std::to_string(value));
    }
    const double doubled = value * 2.0;
    if (doubled != std::floor(doubled)) {
        throw InvalidInput("band not on the half-band lattice: " + std::to_string(value));
    }
    return Band(value);
}

Band band_at(int index) {
    if (index < 0 || index >= kBandCount) {
        throw InvalidInput("band index out of range: " + std::to_string(index));
    }
    return Band::from_lattice(kMinBand + 0.5 * index);
}

double clamp_band(double raw) noexcept {
    return std::clamp(raw, kMinBand, kMaxBand);
}

Band round_to_band(double x) {
    if (!std::isfinite(x)) {
        throw InvalidInput("cannot round a non-finite score to a band");
    }
    // x * 2 is exact in binary floating point, so the quarter ties land
    // exactly on .5 and floor(. + 0.5) sends them upward.
    const double steps = std::floor(clamp_band(x) * 2.0 + 0.5);
    return Band::from_lattice(std::clamp(steps / 2.0, kMinBand, kMaxBand));
}

}  // namespace ielts::corpus
