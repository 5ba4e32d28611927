#include "infext/signal.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace infext {

Waveform make_waveform(Eigen::VectorXd samples, int sample_rate) {
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  if (!samples.allFinite()) throw std::invalid_argument("waveform has non-finite samples");
  return Waveform{std::move(samples), sample_rate};
}

Index padded_length(Index len, Index frame_len, Index hop) {
  if (len <= frame_len) return frame_len;
  const Index rem = (len - frame_len) % hop;
  return rem == 0 ? len : len + (hop - rem);
}

Index frame_count(Index len, Index frame_len, Index hop) {
  return (padded_length(len, frame_len, hop) - frame_len) / hop + 1;
}

FrameMatrix frame(const Waveform& w, Index frame_len, Index hop) {
  if (hop < 1 || frame_len < hop) {
    throw std::invalid_argument("frame: need frame_len >= hop >= 1");
  }
  if (w.size() == 0) throw std::invalid_argument("empty input");
  const Index padded = padded_length(w.size(), frame_len, hop);
  const Index n = (padded - frame_len) / hop + 1;
  FrameMatrix f;
  f.data = Eigen::MatrixXd::Zero(frame_len, n);
  f.hop = hop;
  f.source_len = w.size();
  f.sample_rate = w.sample_rate;
  for (Index k = 0; k < n; ++k) {
    const Index start = k * hop;
    const Index avail = std::min(frame_len, w.size() - start);
    if (avail > 0) f.data.col(k).head(avail) = w.samples.segment(start, avail);
  }
  return f;
}

namespace {

void check_frames(const FrameMatrix& f) {
  if (f.hop < 1 || f.frame_len() < f.hop || f.num_frames() < 1 || f.source_len < 0 ||
      f.source_len > (f.num_frames() - 1) * f.hop + f.frame_len()) {
    throw std::invalid_argument("invalid FrameMatrix");
  }
}

}  // namespace

Waveform overlap_add(const FrameMatrix& f) {
  check_frames(f);
  const Index full = (f.num_frames() - 1) * f.hop + f.frame_len();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(full);
  for (Index k = 0; k < f.num_frames(); ++k) {
    out.segment(k * f.hop, f.frame_len()) += f.data.col(k);
  }
  return Waveform{out.head(f.source_len), f.sample_rate};
}

Eigen::VectorXd overlap_count(const FrameMatrix& f) {
  check_frames(f);
  const Index full = (f.num_frames() - 1) * f.hop + f.frame_len();
  Eigen::VectorXd count = Eigen::VectorXd::Zero(full);
  for (Index k = 0; k < f.num_frames(); ++k) {
    count.segment(k * f.hop, f.frame_len()).array() += 1.0;
  }
  return count.head(f.source_len);
}

Waveform overlap_add_normalized(const FrameMatrix& f) {
  Waveform w = overlap_add(f);
  w.samples.array() /= overlap_count(f).array();
  return w;
}

Eigen::VectorXd fft_convolve(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("convolve: empty input");
  const Index out_len = a.size() + b.size() - 1;
  // Short kernels are cheaper (and exact) in the time domain.
  if (std::min(a.size(), b.size()) <= 32) {
    const Eigen::VectorXd& longer = a.size() >= b.size() ? a : b;
    const Eigen::VectorXd& shorter = a.size() >= b.size() ? b : a;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(out_len);
    for (Index k = 0; k < shorter.size(); ++k) {
      out.segment(k, longer.size()) += shorter[k] * longer;
    }
    return out;
  }
  Index n = 1;
  while (n < out_len) n <<= 1;
  std::vector<double> pa(n, 0.0), pb(n, 0.0);
  std::copy(a.data(), a.data() + a.size(), pa.begin());
  std::copy(b.data(), b.data() + b.size(), pb.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> fa, fb;
  fft.fwd(fa, pa);
  fft.fwd(fb, pb);
  for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i];
  std::vector<double> time;
  fft.inv(time, fa);
  return Eigen::Map<const Eigen::VectorXd>(time.data(), out_len);
}

Waveform convolve(const Waveform& w, const Waveform& kernel) {
  if (w.sample_rate != kernel.sample_rate) {
    throw std::invalid_argument("convolve: sample rate mismatch (" +
                                std::to_string(w.sample_rate) + " vs " +
                                std::to_string(kernel.sample_rate) + ")");
  }
  return Waveform{fft_convolve(w.samples, kernel.samples), w.sample_rate};
}

double mean_power(const Eigen::VectorXd& x) {
  if (x.size() == 0) throw std::invalid_argument("power of empty signal");
  return x.squaredNorm() / static_cast<double>(x.size());
}

double power_db(const Waveform& w) {
  return 10.0 * std::log10(mean_power(w.samples) + kPowerFloor);
}

}  // namespace infext
