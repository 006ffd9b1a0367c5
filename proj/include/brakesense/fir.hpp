#pragma once

#include "brakesense/types.hpp"

#include <complex>
#include <vector>

namespace brakesense {

struct FirDesign {
  double low_hz = 1.0;
  double high_hz = 45.0;
  int num_taps = 401;
  double sample_rate = 200.0;
};

/// Linear-phase FIR: symmetric taps, odd length.
struct FirFilter {
  std::vector<double> coefficients;
  FirDesign design;

  int group_delay() const { return (static_cast<int>(coefficients.size()) - 1) / 2; }
};

/// Hamming-windowed sinc band-pass, normalized to unit gain at the band center.
FirFilter design_bandpass(double low_hz, double high_hz, double sample_rate, int num_taps);
inline FirFilter design_bandpass(const FirDesign& d) {
  return design_bandpass(d.low_hz, d.high_hz, d.sample_rate, d.num_taps);
}

/// H(f) = sum_k h[k] exp(-i 2 pi f k / fs).
std::complex<double> frequency_response(const FirFilter& filter, double freq_hz);

/// Zero-phase application: full convolution shifted by the group delay, with
/// reflection padding of (num_taps - 1) / 2 samples at both ends.
SampleMatrix filter_zero_phase(const SampleMatrix& samples, const FirFilter& filter);

/// Filters every channel; events are carried over unchanged.
ContinuousRecording apply_filter(const ContinuousRecording& rec, const FirFilter& filter);

}  // namespace brakesense
