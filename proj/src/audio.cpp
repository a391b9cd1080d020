#include "vnd/audio.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json_util.hpp"
#include "vnd/objective.hpp"
#include "vnd/rng.hpp"

namespace vnd {

using detail::json;

std::size_t MelConfig::window_samples() const {
  return static_cast<std::size_t>(std::llround(sample_rate * window_ms / 1000.0));
}

std::size_t MelConfig::hop_samples() const {
  return static_cast<std::size_t>(std::llround(sample_rate * hop_ms / 1000.0));
}

std::size_t MelConfig::fft_size() const {
  std::size_t n = 1;
  while (n < window_samples()) n <<= 1;
  return n;
}

double MelConfig::fmax_hz() const { return fmax > 0.0 ? fmax : sample_rate / 2.0; }

void MelConfig::validate() const {
  if (sample_rate <= 0) throw std::invalid_argument("MelConfig: sample_rate must be positive");
  if (hop_ms > window_ms) throw std::invalid_argument("MelConfig: hop_ms must be <= window_ms");
  if (hop_samples() == 0 || window_samples() == 0)
    throw std::invalid_argument("MelConfig: window and hop must span at least one sample");
  if (n_mels < 1) throw std::invalid_argument("MelConfig: n_mels must be >= 1");
  if (!(fmin < fmax_hz())) throw std::invalid_argument("MelConfig: fmin must be below fmax");
  if (!(log_floor > 0.0)) throw std::invalid_argument("MelConfig: log_floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Mat mel_filterbank(const MelConfig& cfg) {
  cfg.validate();
  const std::size_t n_fft = cfg.fft_size();
  const std::size_t n_bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.fmax_hz());
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t m = 0; m < edges.size(); ++m)
    edges[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(m) /
                                      static_cast<double>(cfg.n_mels + 1));
  Mat fb(cfg.n_mels, n_bins, 0.0);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m];
    const double center = edges[m + 1];
    const double right = edges[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(n_fft);
      if (f <= left || f >= right) continue;
      fb(m, k) = f <= center ? (f - left) / (center - left) : (right - f) / (right - center);
    }
  }
  return fb;
}

namespace {

// iterative radix-2 FFT, in place; size must be a power of two
void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * 3.14159265358979323846 / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

}  // namespace

Mat mel_spectrogram(const Vec& waveform, const MelConfig& cfg) {
  cfg.validate();
  const std::size_t win = cfg.window_samples();
  const std::size_t hop = cfg.hop_samples();
  if (waveform.size() < win)
    throw std::invalid_argument("mel_spectrogram: waveform shorter than one window (" +
                                std::to_string(waveform.size()) + " < " + std::to_string(win) +
                                " samples)");
  const std::size_t n_fft = cfg.fft_size();
  const std::size_t n_bins = n_fft / 2 + 1;
  const std::size_t n_frames = 1 + (waveform.size() - win) / hop;
  const Mat fb = mel_filterbank(cfg);

  // periodic Hann window
  Vec window(win);
  for (std::size_t n = 0; n < win; ++n)
    window[n] = 0.5 - 0.5 * std::cos(2.0 * 3.14159265358979323846 * static_cast<double>(n) /
                                     static_cast<double>(win));

  Mat spec(n_frames, cfg.n_mels, 0.0);
  std::vector<std::complex<double>> buf(n_fft);
  Vec power(n_bins);
  for (std::size_t fr = 0; fr < n_frames; ++fr) {
    const std::size_t off = fr * hop;
    for (std::size_t n = 0; n < n_fft; ++n)
      buf[n] = n < win ? std::complex<double>(waveform[off + n] * window[n], 0.0)
                       : std::complex<double>(0.0, 0.0);
    fft_radix2(buf);
    for (std::size_t k = 0; k < n_bins; ++k) power[k] = std::norm(buf[k]);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      const double* row = fb.data.data() + m * fb.cols;
      for (std::size_t k = 0; k < n_bins; ++k) e += row[k] * power[k];
      spec(fr, m) = std::log(std::max(e, cfg.log_floor));
    }
  }
  return spec;
}

Vec pool_spectrogram(const Mat& spectrogram) {
  if (spectrogram.rows == 0 || spectrogram.cols == 0)
    throw std::invalid_argument("pool_spectrogram: empty spectrogram");
  const std::size_t n_mels = spectrogram.cols;
  Vec pooled(2 * n_mels, 0.0);
  for (std::size_t m = 0; m < n_mels; ++m) {
    double sum = 0.0;
    double mx = spectrogram(0, m);
    for (std::size_t fr = 0; fr < spectrogram.rows; ++fr) {
      const double v = spectrogram(fr, m);
      sum += v;
      mx = std::max(mx, v);
    }
    pooled[m] = sum / static_cast<double>(spectrogram.rows);
    pooled[n_mels + m] = mx;
  }
  return pooled;
}

AudioModel train_audio(const std::vector<std::pair<Vec, int>>& data, const MelConfig& mel,
                       const AudioTrainConfig& cfg) {
  mel.validate();
  if (cfg.batch_size < 1) throw std::invalid_argument("train_audio: batch_size must be >= 1");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
    throw std::invalid_argument("train_audio: dropout must be in [0, 1)");
  const std::size_t dim = 2 * mel.n_mels;
  std::size_t pos = 0, neg = 0;
  for (const auto& [x, y] : data) {
    if (x.size() != dim)
      throw std::invalid_argument("train_audio: feature length " + std::to_string(x.size()) +
                                  " does not match 2*n_mels = " + std::to_string(dim));
    if (y == 1) ++pos;
    else if (y == 0) ++neg;
    else
      throw std::invalid_argument("train_audio: labels must be 0 or 1");
  }
  if (pos == 0 || neg == 0)
    throw std::runtime_error("train_audio: both labels must be present in the training set");

  AudioModel model;
  model.weight.assign(dim, 0.0);
  model.bias = 0.0;
  model.dropout_rate = cfg.dropout;
  model.mel = mel;

  OptimizerState opt;
  opt.kind = OptimizerKind::Sgd;
  opt.lr = cfg.lr;

  const double keep = 1.0 - cfg.dropout;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Vec masked(dim);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, 0xAD10ull, epoch));
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      Vec gw(dim, 0.0);
      double gb = 0.0;
      const double inv_b = 1.0 / static_cast<double>(end - start);
      for (std::size_t t = start; t < end; ++t) {
        const auto& [x, y] = data[order[t]];
        double z = model.bias;
        for (std::size_t d = 0; d < dim; ++d) {
          double v = x[d];
          if (cfg.dropout > 0.0) v = rng.bernoulli(cfg.dropout) ? 0.0 : v / keep;
          masked[d] = v;
          z += model.weight[d] * v;
        }
        const double err = (z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                     : std::exp(z) / (1.0 + std::exp(z))) -
                           static_cast<double>(y);
        for (std::size_t d = 0; d < dim; ++d) gw[d] += err * masked[d] * inv_b;
        gb += err * inv_b;
      }
      std::vector<ParamRef> params{{model.weight.data(), gw.data(), dim},
                                   {&model.bias, &gb, 1}};
      optimizer_step(params, opt);
    }
  }
  return model;
}

double predict_audio(const AudioModel& model, const Vec& features) {
  if (features.size() != model.weight.size())
    throw std::invalid_argument("predict_audio: feature length " +
                                std::to_string(features.size()) + " does not match model (" +
                                std::to_string(model.weight.size()) + ")");
  const double z = dot(model.weight, features) + model.bias;
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

void save_waveform(const Vec& samples, int sample_rate, const std::string& path) {
  if (sample_rate <= 0) throw std::invalid_argument("save_waveform: bad sample rate");
  std::ostringstream out;
  json header;
  header["sample_rate"] = sample_rate;
  header["n_samples"] = samples.size();
  out << header.dump() << "\n";
  for (double s : samples) out << json(s).dump() << "\n";
  detail::write_file(path, out.str());
}

Vec load_waveform(const std::string& path, int* sample_rate) {
  std::istringstream in(detail::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("waveform file is empty: " + path);
  json header = json::parse(line);
  if (sample_rate) *sample_rate = header.at("sample_rate").get<int>();
  const std::size_t n = header.at("n_samples").get<std::size_t>();
  Vec samples;
  samples.reserve(n);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    samples.push_back(json::parse(line).get<double>());
  }
  if (samples.size() != n)
    throw std::runtime_error("waveform file: header declares " + std::to_string(n) +
                             " samples, found " + std::to_string(samples.size()));
  return samples;
}

namespace {

json mel_to_json(const MelConfig& cfg) {
  json j;
  j["sample_rate"] = cfg.sample_rate;
  j["window_ms"] = cfg.window_ms;
  j["hop_ms"] = cfg.hop_ms;
  j["n_mels"] = cfg.n_mels;
  j["fmin"] = cfg.fmin;
  j["fmax"] = cfg.fmax;
  j["log_floor"] = cfg.log_floor;
  return j;
}

MelConfig mel_from_json(const json& j) {
  MelConfig cfg;
  cfg.sample_rate = j.at("sample_rate").get<int>();
  cfg.window_ms = j.at("window_ms").get<double>();
  cfg.hop_ms = j.at("hop_ms").get<double>();
  cfg.n_mels = j.at("n_mels").get<std::size_t>();
  cfg.fmin = j.at("fmin").get<double>();
  cfg.fmax = j.at("fmax").get<double>();
  cfg.log_floor = j.at("log_floor").get<double>();
  return cfg;
}

}  // namespace

void save_audio_model(const AudioModel& model, const std::string& path) {
  json j;
  j["format"] = "vnd-audio-v1";
  j["weight"] = model.weight;
  j["bias"] = model.bias;
  j["dropout_rate"] = model.dropout_rate;
  j["mel"] = mel_to_json(model.mel);
  detail::write_file(path, j.dump() + "\n");
}

AudioModel load_audio_model(const std::string& path) {
  json j = json::parse(detail::read_file(path));
  if (!j.contains("format") || j.at("format").get<std::string>() != "vnd-audio-v1")
    throw std::runtime_error("not an audio model file: " + path);
  AudioModel model;
  model.weight = detail::vec_from_json(j.at("weight"));
  model.bias = j.at("bias").get<double>();
  model.dropout_rate = j.at("dropout_rate").get<double>();
  model.mel = mel_from_json(j.at("mel"));
  if (model.weight.size() != 2 * model.mel.n_mels)
    throw std::runtime_error("audio model: weight length disagrees with mel config");
  return model;
}

}  // namespace vnd
