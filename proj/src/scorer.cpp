#include "seal/scorer.hpp"

#include "seal/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace seal {

using nlohmann::json;

namespace {

constexpr std::string_view kArchitecture = "polyline-scorer/v1:seg8-lin64-relu-maxpool-cat128-lin64-relu-lin2-sigmoid";

Vec2 clamped_at(const Trajectory& t, int step) {
  return t.at_step(std::clamp(step, t.start_index, t.end_index() - 1));
}

double initial_heading(const Trajectory& t) {
  for (std::size_t i = 1; i < t.points.size(); ++i) {
    const Vec2 d = t.points[i] - t.points[0];
    if (d.norm() > 1e-6) return std::atan2(d.y(), d.x());
  }
  return 0.0;
}

using FeatureMatrix = Eigen::Matrix<double, ScorerInput::kFeatureDim, Eigen::Dynamic>;

FeatureMatrix encode_polyline(const Trajectory& self, const Trajectory& other, int lo, int hi, int stride,
                              double role, const Vec2& origin, const Eigen::Matrix2d& to_local) {
  std::vector<int> steps;
  for (int t = lo; t < hi; t += stride) steps.push_back(t);
  if (steps.back() != hi) steps.push_back(hi);
  FeatureMatrix f(ScorerInput::kFeatureDim, static_cast<Eigen::Index>(steps.size() - 1));
  for (std::size_t k = 0; k + 1 < steps.size(); ++k) {
    const int a = steps[k], b = steps[k + 1];
    const Vec2 pa = to_local * (clamped_at(self, a) - origin);
    const Vec2 pb = to_local * (clamped_at(self, b) - origin);
    const Vec2 qa = to_local * (clamped_at(other, a) - origin);
    const Vec2 qb = to_local * (clamped_at(other, b) - origin);
    const Vec2 d = pb - pa;
    const double len = d.norm();
    const Vec2 dir = len > 1e-9 ? Vec2(d / len) : Vec2::Zero();
    const Vec2 mid = 0.5 * (pa + pb);
    auto col = f.col(static_cast<Eigen::Index>(k));
    col << mid.x(), mid.y(), dir.x(), dir.y(), len, role, double(a - kCurrentStep) / kFutureSteps,
        0.5 * ((pa - qa).norm() + (pb - qb).norm());
  }
  return f;
}

template <typename M>
json matrix_json(const M& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw ParseError(std::string("model: bad shape for ") + name);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ParseError(std::string("model: bad shape for ") + name);
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

json points_json(const Polyline& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.x(), p.y()});
  return a;
}

Polyline points_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string("corpus: ") + what + " must be an array");
  Polyline pts;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw ParseError(std::string("corpus: ") + what + " entries must be [x, y]");
    pts.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return pts;
}

}  // namespace

ScorerInput encode_pair(const Trajectory& ego_prev, const Trajectory& candidate, int segment_stride) {
  if (segment_stride < 1) throw ConfigError("segment stride must be positive");
  if (candidate.size() < 2 || ego_prev.size() < 1) throw ValidationError("encode_pair: trajectory too short");
  const Vec2 origin = candidate.points.front();
  const double h = initial_heading(candidate);
  Eigen::Matrix2d to_local;
  to_local << std::cos(h), std::sin(h), -std::sin(h), std::cos(h);
  const int lo = candidate.start_index, hi = candidate.end_index() - 1;
  return {encode_polyline(ego_prev, candidate, lo, hi, segment_stride, 1.0, origin, to_local),
          encode_polyline(candidate, ego_prev, lo, hi, segment_stride, -1.0, origin, to_local)};
}

ScorerModel::ScorerModel()
    : w_enc(Eigen::MatrixXd::Zero(kEncoderDim, kFeatureDim)),
      w_hidden(Eigen::MatrixXd::Zero(kHiddenDim, 2 * kEncoderDim)),
      w_out(Eigen::MatrixXd::Zero(kOutputs, kHiddenDim)),
      b_enc(Eigen::VectorXd::Zero(kEncoderDim)),
      b_hidden(Eigen::VectorXd::Zero(kHiddenDim)),
      b_out(Eigen::VectorXd::Zero(kOutputs)) {}

ScorerModel ScorerModel::initialised(std::uint64_t seed) {
  ScorerModel m;
  m.training_seed = seed;
  CounterRng rng(mix_seed({seed, 0x5c0de}));
  auto fill = [&](Eigen::MatrixXd& w) {
    const double sd = std::sqrt(2.0 / static_cast<double>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = sd * rng.normal();
  };
  fill(m.w_enc);
  fill(m.w_hidden);
  fill(m.w_out);
  m.w_out *= 0.1;
  return m;
}

namespace {

struct Forward {
  Eigen::MatrixXd xe, xa;        // normalised features
  Eigen::MatrixXd he, ha;        // post-ReLU encodings
  Eigen::VectorXi arg_e, arg_a;  // max-pool winners
  Eigen::VectorXd z, pre2, h2, y;
};

void pool(const Eigen::MatrixXd& h, Eigen::VectorXd& out, Eigen::VectorXi& arg) {
  out.resize(h.rows());
  arg.resize(h.rows());
  for (Eigen::Index r = 0; r < h.rows(); ++r) {
    Eigen::Index j = 0;
    out(r) = h.row(r).maxCoeff(&j);
    arg(r) = static_cast<int>(j);
  }
}

Forward forward(const ScorerModel& m, const ScorerInput& in) {
  Forward f;
  const auto norm = [&](const FeatureMatrix& x) -> Eigen::MatrixXd {
    return (x.colwise() - m.feature_mean).array().colwise() / m.feature_scale.array();
  };
  f.xe = norm(in.ego);
  f.xa = norm(in.adv);
  f.he = ((m.w_enc * f.xe).colwise() + m.b_enc).cwiseMax(0.0);
  f.ha = ((m.w_enc * f.xa).colwise() + m.b_enc).cwiseMax(0.0);
  Eigen::VectorXd pe, pa;
  pool(f.he, pe, f.arg_e);
  pool(f.ha, pa, f.arg_a);
  f.z.resize(2 * ScorerModel::kEncoderDim);
  f.z << pe, pa;
  f.pre2 = m.w_hidden * f.z + m.b_hidden;
  f.h2 = f.pre2.cwiseMax(0.0);
  f.y = (m.w_out * f.h2 + m.b_out).unaryExpr([](double v) { return sigmoid(v); });
  return f;
}

}  // namespace

CritScore ScorerModel::predict(const ScorerInput& input) const {
  const Forward f = forward(*this, input);
  return {f.y(0), f.y(1)};
}

double ScorerModel::loss_and_gradient(const ScorerInput& input, const CritScore& target, bool per_head,
                                      Gradient* grad) const {
  const Forward f = forward(*this, input);
  Eigen::Vector2d dy;
  double loss;
  if (per_head) {
    const Eigen::Vector2d r(f.y(0) - target.f_coll, f.y(1) - target.f_diff);
    loss = r.squaredNorm();
    dy = 2.0 * r;
  } else {
    const double r = f.y(0) + f.y(1) - target.sum();
    loss = r * r;
    dy.setConstant(2.0 * r);
  }
  if (!grad) return loss;

  const Eigen::VectorXd dout = dy.array() * f.y.array() * (1.0 - f.y.array());
  grad->w_out += dout * f.h2.transpose();
  grad->b_out += dout;
  const Eigen::VectorXd dpre2 =
      (w_out.transpose() * dout).array() * (f.pre2.array() > 0.0).cast<double>();
  grad->w_hidden += dpre2 * f.z.transpose();
  grad->b_hidden += dpre2;
  const Eigen::VectorXd dz = w_hidden.transpose() * dpre2;

  // Max-pool routes each channel's gradient to its winning segment; a zero
  // winner means the ReLU was inactive there (or every segment was clipped).
  const auto back_pool = [&](const Eigen::MatrixXd& h, const Eigen::MatrixXd& x, const Eigen::VectorXi& arg,
                             Eigen::Index offset) {
    for (Eigen::Index c = 0; c < kEncoderDim; ++c) {
      const Eigen::Index j = arg(c);
      if (h(c, j) <= 0.0) continue;
      const double g = dz(offset + c);
      grad->w_enc.row(c) += g * x.col(j).transpose();
      grad->b_enc(c) += g;
    }
  };
  back_pool(f.he, f.xe, f.arg_e, 0);
  back_pool(f.ha, f.xa, f.arg_a, kEncoderDim);
  return loss;
}

int ScorerModel::parameter_count() {
  return kEncoderDim * kFeatureDim + kEncoderDim + kHiddenDim * 2 * kEncoderDim + kHiddenDim +
         kOutputs * kHiddenDim + kOutputs;
}

namespace {

template <typename F>
void for_each_block(F&& f, auto& w_enc, auto& b_enc, auto& w_hidden, auto& b_hidden, auto& w_out, auto& b_out) {
  f(w_enc);
  f(b_enc);
  f(w_hidden);
  f(b_hidden);
  f(w_out);
  f(b_out);
}

}  // namespace

Eigen::VectorXd ScorerModel::parameters() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index at = 0;
  for_each_block(
      [&](const auto& m) {
        flat.segment(at, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
        at += m.size();
      },
      w_enc, b_enc, w_hidden, b_hidden, w_out, b_out);
  return flat;
}

void ScorerModel::set_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) throw ValidationError("set_parameters: wrong parameter count");
  Eigen::Index at = 0;
  for_each_block(
      [&](auto& m) {
        Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = flat.segment(at, m.size());
        at += m.size();
      },
      w_enc, b_enc, w_hidden, b_hidden, w_out, b_out);
}

std::string ScorerModel::architecture_hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(kArchitecture)));
  return buf;
}

ScorerModel::Gradient::Gradient(const ScorerModel& m)
    : w_enc(Eigen::MatrixXd::Zero(m.w_enc.rows(), m.w_enc.cols())),
      w_hidden(Eigen::MatrixXd::Zero(m.w_hidden.rows(), m.w_hidden.cols())),
      w_out(Eigen::MatrixXd::Zero(m.w_out.rows(), m.w_out.cols())),
      b_enc(Eigen::VectorXd::Zero(m.b_enc.size())),
      b_hidden(Eigen::VectorXd::Zero(m.b_hidden.size())),
      b_out(Eigen::VectorXd::Zero(m.b_out.size())) {}

void ScorerModel::Gradient::zero() {
  for_each_block([](auto& m) { m.setZero(); }, w_enc, b_enc, w_hidden, b_hidden, w_out, b_out);
}

Eigen::VectorXd ScorerModel::Gradient::flat() const {
  Eigen::VectorXd out(parameter_count());
  Eigen::Index at = 0;
  for_each_block(
      [&](const auto& m) {
        out.segment(at, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
        at += m.size();
      },
      w_enc, b_enc, w_hidden, b_hidden, w_out, b_out);
  return out;
}

CritScore predict_score(const ScorerModel& model, const Trajectory& ego_prev, const Trajectory& candidate) {
  return model.predict(encode_pair(ego_prev, candidate, model.segment_stride));
}

ScorerTrainingResult train_scorer(const std::vector<CorpusEntry>& corpus, std::uint64_t seed,
                                  const ScorerTrainingOptions& options) {
  if (corpus.size() < options.min_corpus)
    throw ValidationError("train_scorer: corpus has " + std::to_string(corpus.size()) + " triples, need at least " +
                          std::to_string(options.min_corpus));
  if (options.epochs < 1 || options.batch_size < 1 || !(options.learning_rate > 0))
    throw ConfigError("train_scorer: epochs, batch size and learning rate must be positive");

  ScorerTrainingResult result;
  CounterRng split_rng(mix_seed({seed, 1}));

  // Hold out whole scenarios; with a single scenario id fall back to a per-triple split.
  std::vector<std::size_t> train_idx, val_idx;
  std::set<std::string> id_set;
  for (const auto& e : corpus) id_set.insert(e.scenario_id);
  std::vector<std::string> ids(id_set.begin(), id_set.end());
  const auto shuffle = [](auto& v, CounterRng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  };
  if (ids.size() >= 2) {
    shuffle(ids, split_rng);
    const std::size_t n_val = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(options.validation_fraction * static_cast<double>(ids.size()))), 1,
        ids.size() - 1);
    const std::set<std::string> held(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
    result.validation_scenarios.assign(held.begin(), held.end());
    for (std::size_t i = 0; i < corpus.size(); ++i)
      (held.count(corpus[i].scenario_id) ? val_idx : train_idx).push_back(i);
  } else {
    std::vector<std::size_t> all(corpus.size());
    std::iota(all.begin(), all.end(), 0);
    shuffle(all, split_rng);
    const std::size_t n_val = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(options.validation_fraction * static_cast<double>(all.size()))), 1,
        all.size() - 1);
    val_idx.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_val));
    train_idx.assign(all.begin() + static_cast<std::ptrdiff_t>(n_val), all.end());
    if (!ids.empty()) result.validation_scenarios = ids;
  }

  std::vector<ScorerInput> inputs;
  inputs.reserve(corpus.size());
  for (const auto& e : corpus) inputs.push_back(encode_pair(e.ego_prev, e.candidate, options.segment_stride));

  ScorerModel model = ScorerModel::initialised(seed);
  model.segment_stride = options.segment_stride;

  // Normalisation constants from the training split only.
  Eigen::Matrix<double, ScorerModel::kFeatureDim, 1> sum = decltype(sum)::Zero(), sq = decltype(sq)::Zero();
  double count = 0;
  for (std::size_t i : train_idx)
    for (const FeatureMatrix* x : {&inputs[i].ego, &inputs[i].adv}) {
      sum += x->rowwise().sum();
      sq += x->array().square().matrix().rowwise().sum();
      count += static_cast<double>(x->cols());
    }
  model.feature_mean = sum / count;
  for (int k = 0; k < ScorerModel::kFeatureDim; ++k) {
    const double var = sq(k) / count - model.feature_mean(k) * model.feature_mean(k);
    model.feature_scale(k) = var > 1e-12 ? std::sqrt(var) : 1.0;
  }

  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Eigen::VectorXd theta = model.parameters();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(theta.size()), m2 = m1;
  ScorerModel::Gradient grad(model);
  CounterRng order_rng(mix_seed({seed, 2}));
  long t = 0;
  std::vector<std::size_t> order = train_idx;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    shuffle(order, order_rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      grad.zero();
      for (std::size_t k = start; k < end; ++k)
        model.loss_and_gradient(inputs[order[k]], corpus[order[k]].score, options.per_head_loss, &grad);
      const Eigen::VectorXd g = grad.flat() / static_cast<double>(end - start);
      ++t;
      m1 = b1 * m1 + (1 - b1) * g;
      m2 = b2 * m2 + (1 - b2) * g.cwiseProduct(g);
      const double c1 = 1 - std::pow(b1, static_cast<double>(t)), c2 = 1 - std::pow(b2, static_cast<double>(t));
      theta.array() -= options.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
      model.set_parameters(theta);
    }
  }

  const auto mean_loss = [&](const std::vector<std::size_t>& idx) {
    if (idx.empty()) return 0.0;
    double total = 0;
    for (std::size_t i : idx) total += model.loss_and_gradient(inputs[i], corpus[i].score, false, nullptr);
    return total / static_cast<double>(idx.size());
  };
  result.train_loss = mean_loss(train_idx);
  result.validation_loss = mean_loss(val_idx);
  if (!theta.allFinite()) throw ValidationError("train_scorer: weights diverged");
  result.model = std::move(model);
  return result;
}

Ranking rank_learned(const ScorerModel& model, const CandidateSet& candidates, const EgoHistory& history) {
  if (history.empty()) throw ValidationError("rank_learned: ego history is empty");
  Ranking r;
  for (const auto& c : candidates.candidates) {
    double total = 0;
    for (const auto& ego : history.entries()) total += predict_score(model, ego, c).sum();
    r.scores.push_back(total / history.size());
  }
  r.best = argmax_lowest(r.scores);
  return r;
}

void save_model(const ScorerModel& model, const std::filesystem::path& path) {
  json j;
  j["format"] = "seal-scorer";
  j["version"] = 1;
  j["architecture"] = kArchitecture;
  j["architecture_hash"] = model.architecture_hash();
  j["segment_stride"] = model.segment_stride;
  j["training_seed"] = model.training_seed;
  j["feature_mean"] = std::vector<double>(model.feature_mean.data(), model.feature_mean.data() + model.kFeatureDim);
  j["feature_scale"] =
      std::vector<double>(model.feature_scale.data(), model.feature_scale.data() + model.kFeatureDim);
  j["w_enc"] = matrix_json(model.w_enc);
  j["b_enc"] = matrix_json(model.b_enc);
  j["w_hidden"] = matrix_json(model.w_hidden);
  j["b_hidden"] = matrix_json(model.b_hidden);
  j["w_out"] = matrix_json(model.w_out);
  j["b_out"] = matrix_json(model.b_out);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
}

ScorerModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  ScorerModel m;
  try {
    if (j.at("version").get<int>() != 1) throw ParseError("model: unsupported version");
    if (j.at("architecture_hash").get<std::string>() != m.architecture_hash())
      throw ConfigError("model: architecture hash mismatch");
    m.segment_stride = j.at("segment_stride").get<int>();
    m.training_seed = j.at("training_seed").get<std::uint64_t>();
    const auto mean = j.at("feature_mean").get<std::vector<double>>();
    const auto scale = j.at("feature_scale").get<std::vector<double>>();
    if (mean.size() != ScorerModel::kFeatureDim || scale.size() != ScorerModel::kFeatureDim)
      throw ParseError("model: bad normalisation size");
    for (int k = 0; k < ScorerModel::kFeatureDim; ++k) {
      m.feature_mean(k) = mean[static_cast<std::size_t>(k)];
      m.feature_scale(k) = scale[static_cast<std::size_t>(k)];
    }
    m.w_enc = matrix_from_json(j.at("w_enc"), ScorerModel::kEncoderDim, ScorerModel::kFeatureDim, "w_enc");
    m.b_enc = matrix_from_json(j.at("b_enc"), ScorerModel::kEncoderDim, 1, "b_enc");
    m.w_hidden = matrix_from_json(j.at("w_hidden"), ScorerModel::kHiddenDim, 2 * ScorerModel::kEncoderDim, "w_hidden");
    m.b_hidden = matrix_from_json(j.at("b_hidden"), ScorerModel::kHiddenDim, 1, "b_hidden");
    m.w_out = matrix_from_json(j.at("w_out"), ScorerModel::kOutputs, ScorerModel::kHiddenDim, "w_out");
    m.b_out = matrix_from_json(j.at("b_out"), ScorerModel::kOutputs, 1, "b_out");
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (!m.parameters().allFinite()) throw ValidationError("model: non-finite weights");
  return m;
}

std::string corpus_line(const CorpusEntry& e) {
  json j;
  j["scenario_id"] = e.scenario_id;
  j["candidate_index"] = e.candidate_index;
  j["ego_prev"] = points_json(e.ego_prev.points);
  j["candidate"] = points_json(e.candidate.points);
  j["f_coll"] = e.score.f_coll;
  j["f_diff"] = e.score.f_diff;
  return j.dump();
}

CorpusEntry parse_corpus_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("corpus: ") + e.what());
  }
  CorpusEntry e;
  try {
    e.scenario_id = j.at("scenario_id").get<std::string>();
    e.candidate_index = j.at("candidate_index").get<int>();
    e.ego_prev = {points_from_json(j.at("ego_prev"), "ego_prev"), 0};
    e.candidate = {points_from_json(j.at("candidate"), "candidate"), kCurrentStep};
    e.score = {j.at("f_coll").get<double>(), j.at("f_diff").get<double>()};
  } catch (const json::exception& ex) {
    throw ParseError(std::string("corpus: ") + ex.what());
  }
  return e;
}

void save_corpus(const std::vector<CorpusEntry>& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& e : corpus) out << corpus_line(e) << '\n';
}

std::vector<CorpusEntry> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<CorpusEntry> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(parse_corpus_line(line));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

Trajectory baseline_ego_rollout(const Scenario& s) {
  PolicyBinding bindings = replay_all(s);
  bindings[s.ego_id] = IdmPolicy{default_idm(s, s.ego_id), {}};
  return run_episode(s, bindings, 0).trace(s.ego_id).trajectory;
}

std::vector<CorpusEntry> oracle_corpus(const Scenario& s, std::uint64_t seed) {
  const CandidateSet set = sample_candidates(s, seed);
  EgoHistory history;
  history.push(baseline_ego_rollout(s));
  std::vector<CorpusEntry> out;
  for (std::size_t i = 0; i < set.candidates.size(); ++i)
    out.push_back({s.id, static_cast<int>(i), history.latest(), set.candidates[i],
                   oracle_score(s, set.candidates[i], history)});
  return out;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ValidationError("spearman: need two equal-length samples");
  const auto ra = ranks(a), rb = ranks(b);
  const Eigen::Map<const Eigen::VectorXd> x(ra.data(), static_cast<Eigen::Index>(ra.size()));
  const Eigen::Map<const Eigen::VectorXd> y(rb.data(), static_cast<Eigen::Index>(rb.size()));
  const Eigen::VectorXd dx = x.array() - x.mean(), dy = y.array() - y.mean();
  const double denom = dx.norm() * dy.norm();
  return denom > 0 ? dx.dot(dy) / denom : 0.0;
}

ScorerFidelity scorer_fidelity(const ScorerModel& model, const std::vector<CorpusEntry>& corpus,
                               const std::vector<std::string>& scenario_ids) {
  const std::set<std::string> wanted(scenario_ids.begin(), scenario_ids.end());
  std::map<std::string, std::vector<std::pair<double, double>>> groups;  // (predicted, oracle)
  std::vector<double> pred, truth;
  ScorerFidelity out;
  for (const auto& e : corpus) {
    if (!wanted.contains(e.scenario_id)) continue;
    const double p = predict_score(model, e.ego_prev, e.candidate).sum();
    groups[e.scenario_id].emplace_back(p, e.score.sum());
    pred.push_back(p);
    truth.push_back(e.score.sum());
    out.mae += std::abs(p - e.score.sum());
  }
  if (pred.size() < 2) throw ValidationError("scorer_fidelity: fewer than two held-out entries");
  out.mae /= static_cast<double>(pred.size());
  out.spearman = spearman(pred, truth);
  int hits = 0;
  for (const auto& [id, g] : groups) {
    std::size_t best = 0;
    double oracle_max = g[0].second;
    for (std::size_t i = 1; i < g.size(); ++i) {
      if (g[i].first > g[best].first) best = i;
      oracle_max = std::max(oracle_max, g[i].second);
    }
    hits += g[best].second >= oracle_max - 1e-9;
  }
  out.scenarios = static_cast<int>(groups.size());
  out.top1 = static_cast<double>(hits) / out.scenarios;
  return out;
}

}  // namespace seal
