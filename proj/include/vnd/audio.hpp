#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vnd/la.hpp"

namespace vnd {

struct MelConfig {
  int sample_rate = 16000;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  std::size_t n_mels = 64;
  double fmin = 0.0;
  double fmax = 0.0;  // 0 means sample_rate / 2
  double log_floor = 1e-10;

  std::size_t window_samples() const;
  std::size_t hop_samples() const;
  std::size_t fft_size() const;  // next power of two >= window_samples
  double fmax_hz() const;
  void validate() const;
};

// HTK mel scale helpers
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// n_mels x (fft_size/2 + 1), triangular filters normalized to unit peak.
Mat mel_filterbank(const MelConfig& cfg);

// frames x n_mels log-power. Hann-windowed frames, magnitude-squared DFT,
// mel filterbank, natural log with floor. frames = 1 + floor((len-win)/hop).
Mat mel_spectrogram(const Vec& waveform, const MelConfig& cfg);

// Per-mel-bin mean over frames followed by per-mel-bin max: 2*n_mels values.
Vec pool_spectrogram(const Mat& spectrogram);

// Logistic head over pooled spectrogram statistics.
struct AudioModel {
  Vec weight;  // 2 * n_mels
  double bias = 0.0;
  double dropout_rate = 0.1;
  MelConfig mel;
};

struct AudioTrainConfig {
  double lr = 1e-2;
  std::size_t batch_size = 16;
  double dropout = 0.1;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
};

// BCE via SGD with input dropout during training (inverted scaling, no
// dropout at inference); deterministic given the seed. Zero-initialized, so
// zero epochs predicts 0.5 everywhere.
AudioModel train_audio(const std::vector<std::pair<Vec, int>>& data, const MelConfig& mel,
                       const AudioTrainConfig& cfg);

// sigma(w . x + b)
double predict_audio(const AudioModel& model, const Vec& features);

// Single-channel PCM: a JSON metadata header line then one sample per line.
void save_waveform(const Vec& samples, int sample_rate, const std::string& path);
Vec load_waveform(const std::string& path, int* sample_rate);

void save_audio_model(const AudioModel& model, const std::string& path);
AudioModel load_audio_model(const std::string& path);

}  // namespace vnd
