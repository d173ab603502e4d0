#pragma once

#include <compare>

namespace ielts::corpus {

inline constexpr double kMinBand = 1.0;
inline constexpr double kMaxBand = 9.0;

// An IELTS band on the half-point lattice {1.0, 1.5, ..., 9.0}.
class Band {
public:
    Band() = default;

    // Throws InvalidInput unless `value` lies on the lattice.
    static Band from_lattice(double value);

    double value() const noexcept { return value_; }

    // Index on the lattice: 1.0 -> 0, 1.5 -> 1, ..., 9.0 -> 16.
    int index() const noexcept { return static_cast<int>(value_ * 2.0 + 0.5) - 2; }

    friend auto operator<=>(const Band&, const Band&) = default;

private:
    explicit Band(double value) : value_(value) {}

    double value_ = kMinBand;
};

inline constexpr int kBandCount = 17;

// Band with the given lattice index (0..16).
Band band_at(int index);

// Clamp a raw prediction to the reporting range [1, 9].
double clamp_band(double raw) noexcept;

// Nearest half-point band. Exact quarter ties (x.25, x.75) round upward and
// the result is clamped to [1, 9]. Throws InvalidInput for non-finite input.
Band round_to_band(double x);

}  // namespace ielts::corpus
