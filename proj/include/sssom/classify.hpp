#pragma once

// Text classification: word n-gram tokenizer, an embedding-average softmax
// classifier trained by SGD, a hinge-loss linear baseline with C selected by
// stratified k-fold F1, and edge-case selection for iterative labeling.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sssom/core.hpp"
#include "sssom/ingest.hpp"

namespace sssom {

inline constexpr int kMaxNgram = 6;

// --- tokenizer ---------------------------------------------------------------

namespace detail {

// Decodes one UTF-8 code point at `i`, advancing it. Invalid bytes decode as
// U+FFFD and consume one byte.
inline char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0 && cont(1) >= 0) {
    const char32_t cp = ((b0 & 0x1F) << 6) | cont(1);
    i += 2;
    return cp;
  }
  if ((b0 & 0xF0) == 0xE0 && cont(1) >= 0 && cont(2) >= 0) {
    const char32_t cp = ((b0 & 0x0F) << 12) | (cont(1) << 6) | cont(2);
    i += 3;
    return cp;
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) >= 0 && cont(2) >= 0 && cont(3) >= 0) {
    const char32_t cp = ((b0 & 0x07) << 18) | (cont(1) << 12) | (cont(2) << 6) | cont(3);
    i += 4;
    return cp;
  }
  ++i;
  return 0xFFFD;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

inline bool is_apostrophe(char32_t c) { return c == U'\'' || c == U'’'; }

// Whitespace, punctuation and symbols from ASCII, Latin-1, the general
// punctuation block and CJK punctuation separate words.
inline bool is_separator(char32_t c) {
  if (c < 0x80) {
    return !((c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'));
  }
  return (c >= 0x80 && c <= 0xBF) || c == 0xD7 || c == 0xF7 || (c >= 0x2000 && c <= 0x206F) ||
         (c >= 0x3000 && c <= 0x303F) || c == 0xFEFF || c == 0xFFFD || (c >= 0xFF01 && c <= 0xFF0F);
}

// Simple case folding for ASCII, Latin-1, Greek and Cyrillic.
inline char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 32;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  return c;
}

}  // namespace detail

// Lowercased word tokens; apostrophes are kept only between word characters.
inline std::vector<std::string> words(std::string_view text) {
  std::vector<char32_t> cps;
  for (std::size_t i = 0; i < text.size();) cps.push_back(detail::to_lower(detail::next_code_point(text, i)));

  std::vector<std::string> out;
  std::string current;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i];
    if (detail::is_apostrophe(c)) {
      const bool inside = !current.empty() && i + 1 < cps.size() && !detail::is_separator(cps[i + 1]) &&
                          !detail::is_apostrophe(cps[i + 1]);
      if (inside) {
        current += '\'';
        continue;
      }
    } else if (!detail::is_separator(c)) {
      detail::append_utf8(current, c);
      continue;
    }
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

// All contiguous word n-grams for n = 1..max_n, joined with '_', ordered by n
// then position.
inline std::vector<std::string> tokenize(std::string_view text, int max_n = kMaxNgram) {
  const auto ws = words(text);
  std::vector<std::string> out;
  for (int n = 1; n <= max_n; ++n) {
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= ws.size(); ++i) {
      std::string gram = ws[i];
      for (int k = 1; k < n; ++k) {
        gram += '_';
        gram += ws[i + k];
      }
      out.push_back(std::move(gram));
    }
  }
  return out;
}

// --- vocabulary ----------------------------------------------------------------

struct LabeledText {
  std::string text;
  Label label = Label::negative;
};

// N-grams occurring at least min_freq times; indices follow lexicographic order.
class Vocab {
 public:
  Vocab() = default;

  static Vocab build(const std::vector<LabeledText>& corpus, int min_freq, int max_n = kMaxNgram) {
    require(min_freq >= 1, "min_freq must be positive");
    require(max_n >= 1, "max_n must be positive");
    std::map<std::string, std::uint64_t> counts;
    for (const auto& doc : corpus) {
      for (auto& g : tokenize(doc.text, max_n)) ++counts[std::move(g)];
    }
    std::vector<std::string> terms;
    for (auto& [term, n] : counts) {
      if (n >= static_cast<std::uint64_t>(min_freq)) terms.push_back(term);
    }
    return Vocab(std::move(terms), min_freq, max_n);
  }

  Vocab(std::vector<std::string> terms, int min_freq, int max_n)
      : terms_(std::move(terms)), min_freq_(min_freq), max_n_(max_n) {
    index_.reserve(terms_.size());
    for (std::size_t i = 0; i < terms_.size(); ++i) index_.emplace(terms_[i], static_cast<int>(i));
  }

  std::size_t size() const { return terms_.size(); }
  int min_freq() const { return min_freq_; }
  int max_n() const { return max_n_; }
  const std::vector<std::string>& terms() const { return terms_; }

  std::optional<int> find(const std::string& term) const {
    auto it = index_.find(term);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // In-vocabulary n-gram indices of a text, with multiplicity.
  std::vector<int> encode(std::string_view text) const {
    std::vector<int> out;
    for (const auto& g : tokenize(text, max_n_)) {
      if (auto idx = find(g)) out.push_back(*idx);
    }
    return out;
  }

  bool operator==(const Vocab& o) const {
    return terms_ == o.terms_ && min_freq_ == o.min_freq_ && max_n_ == o.max_n_;
  }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, int> index_;
  int min_freq_ = 2;
  int max_n_ = kMaxNgram;
};

// --- embedding classifier ----------------------------------------------------

struct EmbeddingParams {
  int dim = 100;
  int epochs = 20;
  double step = 0.05;
  int min_freq = 2;
  std::uint64_t seed = 0;

  bool operator==(const EmbeddingParams&) const = default;
};

// Class 0 is negative, class 1 positive. A text is represented by the mean
// of its in-vocabulary n-gram embeddings (zero vector when there are none)
// and scored by a softmax layer.
struct EmbeddingModel {
  Vocab vocab;
  int dim = 0;
  std::vector<double> embedding;  // vocab.size() x dim, row-major
  std::vector<double> output;     // dim x 2, row-major
  std::array<double, 2> bias{};
  EmbeddingParams params;

  // Zero parameters: every prediction is 0.5.
  static EmbeddingModel zeros(Vocab vocab, int dim) {
    EmbeddingModel m;
    m.vocab = std::move(vocab);
    m.dim = dim;
    m.params.dim = dim;
    m.embedding.assign(m.vocab.size() * static_cast<std::size_t>(dim), 0.0);
    m.output.assign(static_cast<std::size_t>(dim) * 2, 0.0);
    return m;
  }

  std::vector<double> represent(const std::vector<int>& doc) const {
    std::vector<double> h(static_cast<std::size_t>(dim), 0.0);
    if (doc.empty()) return h;
    for (int g : doc) {
      const double* row = &embedding[static_cast<std::size_t>(g) * dim];
      for (int k = 0; k < dim; ++k) h[k] += row[k];
    }
    const double inv = 1.0 / static_cast<double>(doc.size());
    for (auto& x : h) x *= inv;
    return h;
  }

  std::array<double, 2> probabilities_encoded(const std::vector<int>& doc) const {
    const auto h = represent(doc);
    std::array<double, 2> z = bias;
    for (int k = 0; k < dim; ++k) {
      z[0] += h[k] * output[static_cast<std::size_t>(k) * 2];
      z[1] += h[k] * output[static_cast<std::size_t>(k) * 2 + 1];
    }
    const double m = std::max(z[0], z[1]);
    const double e0 = std::exp(z[0] - m), e1 = std::exp(z[1] - m);
    const double s = e0 + e1;
    return {e0 / s, e1 / s};
  }

  std::array<double, 2> probabilities(std::string_view text) const {
    return probabilities_encoded(vocab.encode(text));
  }

  bool operator==(const EmbeddingModel&) const = default;
};

inline double predict(const EmbeddingModel& model, std::string_view text) {
  return model.probabilities(text)[1];
}

inline Label classify(const EmbeddingModel& model, std::string_view text, double threshold = 0.5) {
  require(threshold > 0.0 && threshold < 1.0, "threshold must be in (0,1)");
  return predict(model, text) >= threshold ? Label::positive : Label::negative;
}

struct EncodedDoc {
  std::vector<int> grams;
  int label = 0;
};

inline std::vector<EncodedDoc> encode_corpus(const Vocab& vocab, const std::vector<LabeledText>& corpus) {
  std::vector<EncodedDoc> out;
  out.reserve(corpus.size());
  for (const auto& doc : corpus) out.push_back({vocab.encode(doc.text), doc.label == Label::positive ? 1 : 0});
  return out;
}

// Mean negative log-likelihood of the true class.
inline double corpus_loss(const EmbeddingModel& model, const std::vector<EncodedDoc>& docs) {
  if (docs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& doc : docs) sum -= std::log(model.probabilities_encoded(doc.grams)[doc.label]);
  return sum / static_cast<double>(docs.size());
}

struct EmbeddingGradient {
  std::vector<double> embedding;
  std::vector<double> output;
  std::array<double, 2> bias{};
};

namespace detail {

// Adds scale * d(-log p_label)/d(params) for one document.
inline void accumulate_gradient(const EmbeddingModel& model, const EncodedDoc& doc, double scale,
                                EmbeddingGradient& grad) {
  const auto h = model.represent(doc.grams);
  const auto p = model.probabilities_encoded(doc.grams);
  const std::array<double, 2> dz{scale * (p[0] - (doc.label == 0 ? 1.0 : 0.0)),
                                 scale * (p[1] - (doc.label == 1 ? 1.0 : 0.0))};
  grad.bias[0] += dz[0];
  grad.bias[1] += dz[1];
  for (int k = 0; k < model.dim; ++k) {
    grad.output[static_cast<std::size_t>(k) * 2] += h[k] * dz[0];
    grad.output[static_cast<std::size_t>(k) * 2 + 1] += h[k] * dz[1];
  }
  if (doc.grams.empty()) return;
  const double inv = 1.0 / static_cast<double>(doc.grams.size());
  for (int g : doc.grams) {
    double* row = &grad.embedding[static_cast<std::size_t>(g) * model.dim];
    for (int k = 0; k < model.dim; ++k) {
      const double dh = model.output[static_cast<std::size_t>(k) * 2] * dz[0] +
                        model.output[static_cast<std::size_t>(k) * 2 + 1] * dz[1];
      row[k] += dh * inv;
    }
  }
}

inline EmbeddingGradient zero_gradient(const EmbeddingModel& model) {
  return {std::vector<double>(model.embedding.size(), 0.0), std::vector<double>(model.output.size(), 0.0), {0.0, 0.0}};
}

}  // namespace detail

// Analytic gradient of corpus_loss.
inline EmbeddingGradient corpus_gradient(const EmbeddingModel& model, const std::vector<EncodedDoc>& docs) {
  auto grad = detail::zero_gradient(model);
  const double scale = docs.empty() ? 0.0 : 1.0 / static_cast<double>(docs.size());
  for (const auto& doc : docs) detail::accumulate_gradient(model, doc, scale, grad);
  return grad;
}

inline void require_two_classes(const std::vector<LabeledText>& corpus) {
  bool pos = false, neg = false;
  for (const auto& d : corpus) (d.label == Label::positive ? pos : neg) = true;
  if (!pos || !neg) fail(ErrorKind::invalid_argument, "training corpus must contain both classes");
}

// Embeddings start uniform in [-1/dim, 1/dim], the softmax layer at zero.
// Plain SGD over seeded shuffles with a step that decays linearly to zero.
inline EmbeddingModel train_embedding(const std::vector<LabeledText>& corpus, const EmbeddingParams& params) {
  require(params.dim >= 1 && params.epochs >= 1 && params.step > 0.0, "invalid embedding parameters");
  require_two_classes(corpus);
  Vocab vocab = Vocab::build(corpus, params.min_freq);
  if (vocab.size() == 0) fail(ErrorKind::invalid_argument, "vocabulary is empty at min_freq " + std::to_string(params.min_freq));

  EmbeddingModel model = EmbeddingModel::zeros(std::move(vocab), params.dim);
  model.params = params;
  Rng rng(derive_seed(params.seed, 0xE3B));
  const double init = 1.0 / static_cast<double>(params.dim);
  for (auto& x : model.embedding) x = rng.uniform(-init, init);

  const auto docs = encode_corpus(model.vocab, corpus);
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), 0);
  const double total_steps = static_cast<double>(params.epochs) * static_cast<double>(docs.size());
  double done = 0.0;
  auto grad = detail::zero_gradient(model);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i : order) {
      const double lr = params.step * (1.0 - done / total_steps);
      done += 1.0;
      const auto& doc = docs[i];
      // Sparse step: only the document's rows, the output layer and biases.
      for (int g : doc.grams) std::fill_n(&grad.embedding[static_cast<std::size_t>(g) * model.dim], model.dim, 0.0);
      std::fill(grad.output.begin(), grad.output.end(), 0.0);
      grad.bias = {0.0, 0.0};
      detail::accumulate_gradient(model, doc, 1.0, grad);
      for (std::size_t k = 0; k < model.output.size(); ++k) model.output[k] -= lr * grad.output[k];
      model.bias[0] -= lr * grad.bias[0];
      model.bias[1] -= lr * grad.bias[1];
      for (int g : doc.grams) {
        double* row = &model.embedding[static_cast<std::size_t>(g) * model.dim];
        double* grow = &grad.embedding[static_cast<std::size_t>(g) * model.dim];
        for (int k = 0; k < model.dim; ++k) {
          if (grow[k] != 0.0) {
            row[k] -= lr * grow[k];
            grow[k] = 0.0;
          }
        }
      }
    }
  }
  return model;
}

// --- linear baseline ---------------------------------------------------------------

// Hinge loss with an L2 penalty, C/2-style trade-off: minimizes
// ||w||^2 / 2 + C * sum hinge. Features are unit-normalized binary n-gram
// presence plus a constant bias feature.
struct LinearModel {
  Vocab vocab;
  std::vector<double> weights;
  double bias = 0.0;
  double C = 1.0;
  std::map<double, double> cv_f1;  // mean fold F1 per candidate C

  double margin(std::string_view text) const {
    auto grams = vocab.encode(text);
    std::sort(grams.begin(), grams.end());
    grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
    double s = 0.0;
    for (int g : grams) s += weights[static_cast<std::size_t>(g)];
    const double norm = grams.empty() ? 1.0 : 1.0 / std::sqrt(static_cast<double>(grams.size()));
    return s * norm + bias;
  }

  bool operator==(const LinearModel&) const = default;
};

inline Label classify(const LinearModel& model, std::string_view text) {
  return model.margin(text) >= 0.0 ? Label::positive : Label::negative;
}

struct BinaryScores {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  double f1() const {
    const double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp) + static_cast<double>(fn);
    return denom == 0.0 ? 1.0 : 2.0 * static_cast<double>(tp) / denom;
  }
  double accuracy() const {
    const double n = static_cast<double>(tp + fp + tn + fn);
    return n == 0.0 ? 1.0 : static_cast<double>(tp + tn) / n;
  }
};

template <typename Classifier>
BinaryScores score_corpus(const Classifier& classify_fn, const std::vector<LabeledText>& docs) {
  BinaryScores s;
  for (const auto& d : docs) {
    const bool predicted = classify_fn(d.text) == Label::positive;
    const bool actual = d.label == Label::positive;
    if (predicted && actual) ++s.tp;
    if (predicted && !actual) ++s.fp;
    if (!predicted && actual) ++s.fn;
    if (!predicted && !actual) ++s.tn;
  }
  return s;
}

struct LinearParams {
  std::vector<double> C_grid{1.0, 10.0, 100.0, 1000.0};
  int folds = 5;
  int epochs = 20;
  int min_freq = 2;
  std::uint64_t seed = 0;
};

namespace detail {

// Pegasos SGD with lambda = 1 / (C n); the weight vector is kept as
// scale * v so the shrink step is O(1).
inline LinearModel fit_hinge(const Vocab& vocab, const std::vector<LabeledText>& corpus, double C, int epochs,
                             std::uint64_t seed) {
  const std::size_t n = corpus.size();
  std::vector<std::vector<int>> feats;
  std::vector<double> ys;
  for (const auto& d : corpus) {
    auto g = vocab.encode(d.text);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    feats.push_back(std::move(g));
    ys.push_back(d.label == Label::positive ? 1.0 : -1.0);
  }
  const std::size_t dims = vocab.size() + 1;  // last = bias feature
  std::vector<double> v(dims, 0.0);
  double scale = 1.0;
  const double lambda = 1.0 / (C * static_cast<double>(n));
  Rng rng(derive_seed(seed, 0x9E6));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const auto& f = feats[i];
      const double norm = f.empty() ? 1.0 : 1.0 / std::sqrt(static_cast<double>(f.size()));
      double dot = v[dims - 1];
      for (int g : f) dot += v[static_cast<std::size_t>(g)] * norm;
      const double m = ys[i] * scale * dot;
      const double shrink = 1.0 - eta * lambda;
      if (shrink <= 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        scale = 1.0;
      } else {
        scale *= shrink;
      }
      if (m < 1.0) {
        const double a = eta * ys[i] / scale;
        for (int g : f) v[static_cast<std::size_t>(g)] += a * norm;
        v[dims - 1] += a;
      }
      if (scale < 1e-100) {
        for (auto& x : v) x *= scale;
        scale = 1.0;
      }
    }
  }
  LinearModel model;
  model.vocab = vocab;
  model.C = C;
  model.weights.resize(vocab.size());
  for (std::size_t k = 0; k < vocab.size(); ++k) model.weights[k] = v[k] * scale;
  model.bias = v[dims - 1] * scale;
  return model;
}

}  // namespace detail

// Stratified fold index per document; needs at least `folds` documents of
// each class.
inline std::vector<int> stratified_folds(const std::vector<LabeledText>& corpus, int folds, std::uint64_t seed) {
  require(folds >= 2, "folds must be >= 2");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < corpus.size(); ++i) (corpus[i].label == Label::positive ? pos : neg).push_back(i);
  if (pos.size() < static_cast<std::size_t>(folds) || neg.size() < static_cast<std::size_t>(folds)) {
    fail(ErrorKind::invalid_argument, "cannot stratify " + std::to_string(pos.size()) + " positive and " +
                                          std::to_string(neg.size()) + " negative documents into " +
                                          std::to_string(folds) + " folds with both classes in every split");
  }
  Rng rng(derive_seed(seed, 0xF01D));
  rng.shuffle(pos);
  rng.shuffle(neg);
  std::vector<int> fold(corpus.size());
  for (std::size_t k = 0; k < pos.size(); ++k) fold[pos[k]] = static_cast<int>(k % folds);
  for (std::size_t k = 0; k < neg.size(); ++k) fold[neg[k]] = static_cast<int>(k % folds);
  return fold;
}

// Picks C by mean positive-class F1 over stratified folds (ties keep the
// smaller C), then refits on the full corpus.
inline LinearModel train_linear(const std::vector<LabeledText>& corpus, const LinearParams& params) {
  require(!params.C_grid.empty(), "C grid must not be empty");
  for (double c : params.C_grid) require(c > 0.0, "C values must be positive");
  require_two_classes(corpus);
  const auto fold = stratified_folds(corpus, params.folds, params.seed);

  std::vector<double> grid = params.C_grid;
  std::sort(grid.begin(), grid.end());
  std::map<double, double> cv;
  for (double C : grid) {
    double sum = 0.0;
    for (int f = 0; f < params.folds; ++f) {
      std::vector<LabeledText> train, test;
      for (std::size_t i = 0; i < corpus.size(); ++i) (fold[i] == f ? test : train).push_back(corpus[i]);
      const Vocab vocab = Vocab::build(train, params.min_freq);
      const LinearModel m = detail::fit_hinge(vocab, train, C, params.epochs, derive_seed(params.seed, static_cast<std::uint64_t>(f)));
      sum += score_corpus([&](std::string_view t) { return classify(m, t); }, test).f1();
    }
    cv[C] = sum / static_cast<double>(params.folds);
  }
  double best = grid.front();
  for (double C : grid) {
    if (cv[C] > cv[best]) best = C;
  }
  const Vocab vocab = Vocab::build(corpus, params.min_freq);
  if (vocab.size() == 0) fail(ErrorKind::invalid_argument, "vocabulary is empty at min_freq " + std::to_string(params.min_freq));
  LinearModel model = detail::fit_hinge(vocab, corpus, best, params.epochs, params.seed);
  model.cv_f1 = std::move(cv);
  return model;
}

// --- edge cases and features -------------------------------------------------

// Indices of the ceil(fraction * n) scores nearest 0.5, nearest first; ties
// keep input order.
inline std::vector<std::size_t> select_edge_indices(const std::vector<double>& probabilities, double fraction) {
  require(fraction > 0.0 && fraction <= 1.0, "edge-case fraction must be in (0,1]");
  std::vector<std::size_t> idx(probabilities.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(probabilities[a] - 0.5) < std::abs(probabilities[b] - 0.5);
  });
  const auto want = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(probabilities.size()) - 1e-9));
  idx.resize(std::min(want, idx.size()));
  return idx;
}

inline std::vector<std::size_t> select_edge_cases(const EmbeddingModel& model, const std::vector<std::string>& texts,
                                                  double fraction = 0.05) {
  std::vector<double> probs;
  probs.reserve(texts.size());
  for (const auto& t : texts) probs.push_back(predict(model, t));
  return select_edge_indices(probs, fraction);
}

struct RankedFeature {
  std::string ngram;
  double score = 0.0;
};

namespace detail {

inline std::vector<RankedFeature> top_k(std::vector<RankedFeature> all, std::size_t k) {
  std::stable_sort(all.begin(), all.end(), [](const RankedFeature& a, const RankedFeature& b) {
    return a.score > b.score;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

}  // namespace detail

// Largest positive-class weights.
inline std::vector<RankedFeature> top_features(const LinearModel& model, std::size_t k) {
  std::vector<RankedFeature> all;
  for (std::size_t i = 0; i < model.vocab.size(); ++i) all.push_back({model.vocab.terms()[i], model.weights[i]});
  return detail::top_k(std::move(all), k);
}

// Score of an n-gram = its embedding projected on (positive - negative)
// output column, i.e. the logit gap it contributes on its own.
inline std::vector<RankedFeature> top_features(const EmbeddingModel& model, std::size_t k) {
  std::vector<RankedFeature> all;
  for (std::size_t i = 0; i < model.vocab.size(); ++i) {
    double s = 0.0;
    for (int d = 0; d < model.dim; ++d) {
      s += model.embedding[i * model.dim + d] *
           (model.output[static_cast<std::size_t>(d) * 2 + 1] - model.output[static_cast<std::size_t>(d) * 2]);
    }
    all.push_back({model.vocab.terms()[i], s});
  }
  return detail::top_k(std::move(all), k);
}

// --- iterative (edge-case) learning -------------------------------------------

struct IterationRecord {
  std::size_t training_size = 0;
  std::vector<std::size_t> labeled_pool_indices;  // pool items labeled this round
};

// Supplies labels for pool texts, e.g. a human annotator.
using Labeler = std::function<Label(const std::string&)>;

// Repeats: train, pick the edge cases from the still-unlabeled pool, label
// them, add them to the training set.
inline std::vector<IterationRecord> iterative_learning(std::vector<LabeledText> training,
                                                       const std::vector<std::string>& pool, const Labeler& labeler,
                                                       int rounds, double fraction, const EmbeddingParams& params,
                                                       EmbeddingModel* final_model = nullptr) {
  require(rounds >= 1, "rounds must be >= 1");
  std::vector<bool> used(pool.size(), false);
  std::vector<IterationRecord> history;
  EmbeddingModel model = train_embedding(training, params);
  for (int r = 0; r < rounds; ++r) {
    std::vector<std::size_t> remaining;
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!used[i]) {
        remaining.push_back(i);
        texts.push_back(pool[i]);
      }
    }
    IterationRecord rec;
    if (!texts.empty()) {
      for (std::size_t j : select_edge_cases(model, texts, fraction)) {
        const std::size_t i = remaining[j];
        used[i] = true;
        training.push_back({pool[i], labeler(pool[i])});
        rec.labeled_pool_indices.push_back(i);
      }
    }
    rec.training_size = training.size();
    history.push_back(std::move(rec));
    model = train_embedding(training, params);
  }
  if (final_model) *final_model = std::move(model);
  return history;
}

// --- serialization -----------------------------------------------------------------
//
// Line-oriented text with hexadecimal floats, so a save/load round trip is
// bit-exact. N-grams never contain whitespace.

namespace detail {

inline void write_values(std::string& out, const double* values, std::size_t n, std::size_t per_line) {
  for (std::size_t i = 0; i < n; ++i) {
    out += format_hex(values[i]);
    out += (i + 1) % per_line == 0 || i + 1 == n ? '\n' : ' ';
  }
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  std::string_view next() {
    if (pos_ >= text_.size()) fail(ErrorKind::malformed_input, "model file truncated at line " + std::to_string(line_));
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    std::string_view line = text_.substr(pos_, end - pos_);
    pos_ = end + 1;
    ++line_;
    return line;
  }

  // "key value" line.
  std::string_view keyed(std::string_view key) {
    const auto line = next();
    if (line.substr(0, key.size()) != key || line.size() <= key.size() || line[key.size()] != ' ') {
      fail(ErrorKind::malformed_input, "model file line " + std::to_string(line_) + ": expected '" + std::string(key) + "'");
    }
    return line.substr(key.size() + 1);
  }

  template <typename Int>
  Int keyed_int(std::string_view key) {
    auto v = parse_int<Int>(keyed(key));
    if (!v) fail(ErrorKind::malformed_input, "model file line " + std::to_string(line_) + ": bad integer");
    return *v;
  }

  double keyed_hex(std::string_view key) {
    auto v = parse_hex(keyed(key));
    if (!v) fail(ErrorKind::malformed_input, "model file line " + std::to_string(line_) + ": bad number");
    return *v;
  }

  std::vector<double> values(std::size_t n) {
    std::vector<double> out;
    out.reserve(n);
    while (out.size() < n) {
      for (auto tok : split(next(), ' ')) {
        if (tok.empty()) continue;
        auto v = parse_hex(tok);
        if (!v) fail(ErrorKind::malformed_input, "model file line " + std::to_string(line_) + ": bad number");
        out.push_back(*v);
      }
    }
    if (out.size() != n) fail(ErrorKind::malformed_input, "model file line " + std::to_string(line_) + ": value count mismatch");
    return out;
  }

  void expect(std::string_view literal) {
    if (next() != literal) {
      fail(ErrorKind::malformed_input, "model file line " + std::to_string(line_) + ": expected '" + std::string(literal) + "'");
    }
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

inline void write_vocab(std::string& out, const Vocab& vocab) {
  out += "min_freq " + std::to_string(vocab.min_freq()) + "\n";
  out += "max_n " + std::to_string(vocab.max_n()) + "\n";
  out += "vocab " + std::to_string(vocab.size()) + "\n";
  for (const auto& t : vocab.terms()) out += t + "\n";
}

inline Vocab read_vocab(LineReader& in) {
  const int min_freq = in.keyed_int<int>("min_freq");
  const int max_n = in.keyed_int<int>("max_n");
  const auto n = in.keyed_int<std::size_t>("vocab");
  std::vector<std::string> terms;
  terms.reserve(n);
  for (std::size_t i = 0; i < n; ++i) terms.emplace_back(in.next());
  return Vocab(std::move(terms), min_freq, max_n);
}

}  // namespace detail

inline constexpr std::string_view kEmbeddingMagic = "sssom-embedding-model 1";
inline constexpr std::string_view kLinearMagic = "sssom-linear-model 1";

inline std::string serialize(const EmbeddingModel& m) {
  std::string out(kEmbeddingMagic);
  out += "\n";
  out += "dim " + std::to_string(m.dim) + "\n";
  out += "epochs " + std::to_string(m.params.epochs) + "\n";
  out += "step " + format_hex(m.params.step) + "\n";
  out += "seed " + std::to_string(m.params.seed) + "\n";
  detail::write_vocab(out, m.vocab);
  out += "embedding\n";
  detail::write_values(out, m.embedding.data(), m.embedding.size(), static_cast<std::size_t>(std::max(1, m.dim)));
  out += "output\n";
  detail::write_values(out, m.output.data(), m.output.size(), 2);
  out += "bias " + format_hex(m.bias[0]) + " " + format_hex(m.bias[1]) + "\n";
  out += "end\n";
  return out;
}

inline EmbeddingModel deserialize_embedding(std::string_view text) {
  detail::LineReader in(text);
  in.expect(kEmbeddingMagic);
  EmbeddingModel m;
  m.dim = in.keyed_int<int>("dim");
  if (m.dim < 1) fail(ErrorKind::malformed_input, "model dim must be positive");
  m.params.dim = m.dim;
  m.params.epochs = in.keyed_int<int>("epochs");
  m.params.step = in.keyed_hex("step");
  m.params.seed = in.keyed_int<std::uint64_t>("seed");
  m.vocab = detail::read_vocab(in);
  m.params.min_freq = m.vocab.min_freq();
  in.expect("embedding");
  m.embedding = in.values(m.vocab.size() * static_cast<std::size_t>(m.dim));
  in.expect("output");
  m.output = in.values(static_cast<std::size_t>(m.dim) * 2);
  const auto bias = split(in.keyed("bias"), ' ');
  if (bias.size() != 2 || !parse_hex(bias[0]) || !parse_hex(bias[1])) fail(ErrorKind::malformed_input, "bad bias line");
  m.bias = {*parse_hex(bias[0]), *parse_hex(bias[1])};
  in.expect("end");
  for (double x : m.embedding) {
    if (!std::isfinite(x)) fail(ErrorKind::invariant, "model has non-finite parameters");
  }
  return m;
}

inline std::string serialize(const LinearModel& m) {
  std::string out(kLinearMagic);
  out += "\n";
  out += "C " + format_hex(m.C) + "\n";
  out += "cv " + std::to_string(m.cv_f1.size()) + "\n";
  for (const auto& [c, f1] : m.cv_f1) out += format_hex(c) + " " + format_hex(f1) + "\n";
  detail::write_vocab(out, m.vocab);
  out += "weights\n";
  detail::write_values(out, m.weights.data(), m.weights.size(), 8);
  out += "bias " + format_hex(m.bias) + "\n";
  out += "end\n";
  return out;
}

inline LinearModel deserialize_linear(std::string_view text) {
  detail::LineReader in(text);
  in.expect(kLinearMagic);
  LinearModel m;
  m.C = in.keyed_hex("C");
  const auto n = in.keyed_int<std::size_t>("cv");
  for (std::size_t i = 0; i < n; ++i) {
    const auto parts = split(in.next(), ' ');
    if (parts.size() != 2 || !parse_hex(parts[0]) || !parse_hex(parts[1])) fail(ErrorKind::malformed_input, "bad cv line");
    m.cv_f1[*parse_hex(parts[0])] = *parse_hex(parts[1]);
  }
  m.vocab = detail::read_vocab(in);
  in.expect("weights");
  m.weights = in.values(m.vocab.size());
  m.bias = in.keyed_hex("bias");
  in.expect("end");
  return m;
}

inline std::vector<LabeledText> labeled_corpus(const std::vector<GeoPost>& posts) {
  std::vector<LabeledText> out;
  for (const auto& p : posts) {
    if (p.label) out.push_back({p.text, *p.label});
  }
  return out;
}

}  // namespace sssom
