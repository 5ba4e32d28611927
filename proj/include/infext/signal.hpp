#pragma once

#include <Eigen/Core>

#include "infext/tensor.hpp"

namespace infext {

// Discrete-time mono signal.
struct Waveform {
  Eigen::VectorXd samples;
  int sample_rate = 16000;

  Index size() const { return samples.size(); }
  double duration() const { return static_cast<double>(size()) / sample_rate; }
};

// Validates the Waveform invariants (finite values, positive rate).
Waveform make_waveform(Eigen::VectorXd samples, int sample_rate);

// Overlapping frames stored column-wise: data(:, k) holds samples
// [k*hop, k*hop + frame_len) of the zero-padded source.
struct FrameMatrix {
  Eigen::MatrixXd data;
  Index hop = 1;
  Index source_len = 0;
  int sample_rate = 16000;

  Index frame_len() const { return data.rows(); }
  Index num_frames() const { return data.cols(); }
};

// Smallest length >= len (and >= frame_len) for which (length - frame_len)
// is a multiple of hop.
Index padded_length(Index len, Index frame_len, Index hop);
Index frame_count(Index len, Index frame_len, Index hop);

FrameMatrix frame(const Waveform& w, Index frame_len, Index hop);

// Sums frames at their offsets and trims to source_len.
Waveform overlap_add(const FrameMatrix& frames);

// Number of frames covering each output sample of overlap_add().
Eigen::VectorXd overlap_count(const FrameMatrix& frames);

// overlap_add() divided by the per-sample frame coverage.
Waveform overlap_add_normalized(const FrameMatrix& frames);

// Full linear convolution via FFT; length size(w) + size(kernel) - 1.
Waveform convolve(const Waveform& w, const Waveform& kernel);
Eigen::VectorXd fft_convolve(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

inline constexpr double kPowerFloor = 1e-12;

double mean_power(const Eigen::VectorXd& x);

// 10*log10(mean(x^2) + 1e-12)
double power_db(const Waveform& w);

}  // namespace infext
