#include "brakesense/fir.hpp"

#include "brakesense/error.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <numbers>

namespace brakesense {

namespace {

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

FirFilter design_bandpass(double low_hz, double high_hz, double sample_rate, int num_taps) {
  if (!(sample_rate > 0.0)) throw UsageError("sample rate must be positive");
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < sample_rate / 2.0))
    throw UsageError("band edges must satisfy 0 < low < high < fs/2 (got " + std::to_string(low_hz) +
                     ", " + std::to_string(high_hz) + " at fs " + std::to_string(sample_rate) + ")");
  if (num_taps < 3 || num_taps % 2 == 0)
    throw UsageError("FIR tap count must be odd and at least 3, got " + std::to_string(num_taps));

  FirFilter f;
  f.design = {low_hz, high_hz, num_taps, sample_rate};
  f.coefficients.resize(static_cast<std::size_t>(num_taps));
  const int mid = (num_taps - 1) / 2;
  const double fl = low_hz / sample_rate;
  const double fh = high_hz / sample_rate;
  for (int k = 0; k <= mid; ++k) {
    const double n = k - mid;
    const double ideal = 2.0 * fh * sinc(2.0 * fh * n) - 2.0 * fl * sinc(2.0 * fl * n);
    const double window = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * k / (num_taps - 1));
    const double tap = ideal * window;
    f.coefficients[static_cast<std::size_t>(k)] = tap;
    f.coefficients[static_cast<std::size_t>(num_taps - 1 - k)] = tap;
  }
  const double gain = std::abs(frequency_response(f, 0.5 * (low_hz + high_hz)));
  for (auto& c : f.coefficients) c /= gain;
  return f;
}

std::complex<double> frequency_response(const FirFilter& filter, double freq_hz) {
  std::complex<double> h = 0.0;
  const double w = -2.0 * std::numbers::pi * freq_hz / filter.design.sample_rate;
  for (std::size_t k = 0; k < filter.coefficients.size(); ++k)
    h += filter.coefficients[k] * std::polar(1.0, w * static_cast<double>(k));
  return h;
}

SampleMatrix filter_zero_phase(const SampleMatrix& samples, const FirFilter& filter) {
  const auto length = static_cast<std::size_t>(samples.cols());
  const auto taps = filter.coefficients.size();
  const auto delay = static_cast<std::size_t>(filter.group_delay());
  if (length < taps)
    throw DataError("recording of " + std::to_string(length) + " samples is shorter than the " +
                    std::to_string(taps) + "-tap filter");

  // Overlap-add over fixed FFT blocks of the reflection-padded signal.
  const std::size_t padded = length + 2 * delay;
  const std::size_t full = padded + taps - 1;
  std::size_t nfft = 4096;
  while (nfft < 4 * taps) nfft <<= 1;
  while (nfft / 2 >= full && nfft / 2 >= 2 * taps) nfft >>= 1;
  const std::size_t block = nfft - taps + 1;

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> kernel(nfft, 0.0);
  std::copy(filter.coefficients.begin(), filter.coefficients.end(), kernel.begin());
  std::vector<std::complex<double>> kernel_spectrum;
  fft.fwd(kernel_spectrum, kernel);

  SampleMatrix out(samples.rows(), samples.cols());
  std::vector<double> input(padded);
  std::vector<double> conv(full + nfft);
  std::vector<double> buffer(nfft);
  std::vector<std::complex<double>> spectrum;
  std::vector<double> result;
  for (Eigen::Index ch = 0; ch < samples.rows(); ++ch) {
    const double* x = samples.row(ch).data();
    // Reflection without repeating the edge sample: x[-i] = x[i].
    for (std::size_t i = 0; i < delay; ++i) {
      input[delay - 1 - i] = x[i + 1];
      input[delay + length + i] = x[length - 2 - i];
    }
    std::copy(x, x + length, input.begin() + static_cast<std::ptrdiff_t>(delay));
    std::fill(conv.begin(), conv.end(), 0.0);
    for (std::size_t begin = 0; begin < padded; begin += block) {
      const std::size_t n = std::min(block, padded - begin);
      std::fill(buffer.begin(), buffer.end(), 0.0);
      std::copy_n(input.begin() + static_cast<std::ptrdiff_t>(begin), n, buffer.begin());
      fft.fwd(spectrum, buffer);
      for (std::size_t i = 0; i < spectrum.size(); ++i) spectrum[i] *= kernel_spectrum[i];
      fft.inv(result, spectrum, static_cast<Eigen::Index>(nfft));
      for (std::size_t i = 0; i < n + taps - 1; ++i) conv[begin + i] += result[i];
    }
    // Full-convolution index n + 2*delay corresponds to output sample n.
    for (std::size_t n = 0; n < length; ++n) out(ch, static_cast<Eigen::Index>(n)) = conv[n + 2 * delay];
  }
  return out;
}

ContinuousRecording apply_filter(const ContinuousRecording& rec, const FirFilter& filter) {
  if (rec.num_samples() == 0) throw DataError("cannot filter an empty recording");
  if (std::abs(filter.design.sample_rate - rec.sample_rate) > 1e-9)
    throw UsageError("filter designed for " + std::to_string(filter.design.sample_rate) +
                     " Hz applied to a " + std::to_string(rec.sample_rate) + " Hz recording");
  ContinuousRecording out;
  out.subject = rec.subject;
  out.montage = rec.montage;
  out.sample_rate = rec.sample_rate;
  out.events = rec.events;
  out.samples = filter_zero_phase(rec.samples, filter);
  return out;
}

}  // namespace brakesense
