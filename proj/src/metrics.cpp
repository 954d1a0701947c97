#include "seal/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <sstream>

namespace seal {

using nlohmann::json;

void Histogram::add(double x) {
  const int k = static_cast<int>(std::floor((x - lo) / width()));
  mass[static_cast<std::size_t>(std::clamp(k, 0, bins() - 1))] += 1.0;
}

bool Histogram::normalise() {
  double total = 0;
  for (double m : mass) total += m;
  if (total <= 0) return false;
  for (double& m : mass) m /= total;
  return true;
}

bool Histogram::empty() const {
  return std::all_of(mass.begin(), mass.end(), [](double m) { return m == 0.0; });
}

Histogram yaw_histogram() { return {-1.5, 1.5, 21}; }
Histogram accel_histogram() { return {-8.0, 8.0, 21}; }
Histogram road_histogram() { return {-0.5, 1.5, 2}; }

double wasserstein_1d(const Histogram& p, const Histogram& q) {
  if (p.bins() != q.bins() || p.lo != q.lo || p.hi != q.hi) throw ValidationError("wasserstein_1d: bin edges differ");
  double cp = 0, cq = 0, w = 0;
  for (int k = 0; k < p.bins(); ++k) {
    cp += p.mass[static_cast<std::size_t>(k)];
    cq += q.mass[static_cast<std::size_t>(k)];
    w += std::abs(cp - cq);
  }
  return w * p.width();
}

BehaviorProfile build_profile(const AgentTrace& trace, const AgentDims& dims, const MapInfo& map, int from, int to) {
  const Trajectory& t = trace.trajectory;
  from = std::max(from, t.start_index);
  to = std::min(to, t.end_index());
  if (to - from < 2) throw ValidationError("build_profile: trace shorter than two steps");
  BehaviorProfile p;
  for (int step = from; step < to; ++step) {
    const auto i = static_cast<std::size_t>(step - t.start_index);
    if (step + 1 < to) {
      p.yaw.add(wrap_angle(trace.heading[i + 1] - trace.heading[i]) / kDt);
      p.accel.add((trace.speed[i + 1] - trace.speed[i]) / kDt);
    }
    AgentState st;
    st.position = t.points[i];
    st.heading = trace.heading[i];
    st.footprint = dims;
    p.road.add(detect_offroad(st, map) ? 1.0 : 0.0);
  }
  p.yaw.normalise();
  p.accel.normalise();
  p.road.normalise();
  return p;
}

BehaviorProfile build_profile(const RolloutRecord& rollout, AgentId agent, const Scenario& base) {
  const AgentTrace& tr = rollout.trace(agent);
  return build_profile(tr, base.dims_of(agent), base.map, tr.trajectory.start_index, tr.trajectory.end_index());
}

RealismScore realism(const RolloutRecord& rollout, const Scenario& base) {
  const AgentTrace& tr = rollout.trace(base.adv_id);
  const AgentDims dims = base.dims_of(base.adv_id);
  const Trajectory& gt = base.trajectory(base.adv_id);
  const AgentTrace truth = trace_from_trajectory(gt, dims);
  const int lo = std::max(gt.start_index, tr.trajectory.start_index);
  const int hi = std::min(gt.end_index(), tr.trajectory.end_index());
  const BehaviorProfile mine = build_profile(tr, dims, base.map, tr.trajectory.start_index, tr.trajectory.end_index());
  const BehaviorProfile ref = build_profile(truth, dims, base.map, lo, hi);
  return {wasserstein_1d(mine.yaw, ref.yaw), wasserstein_1d(mine.accel, ref.accel),
          wasserstein_1d(mine.road, ref.road)};
}

bool is_head_on(const Contact& c) {
  return std::abs(wrap_angle(c.ego_heading - c.other_heading)) >= kHeadOnMinAngle;
}

CollisionStats collision_stats(const std::vector<RolloutRecord>& rollouts) {
  CollisionStats out;
  if (rollouts.empty()) return out;
  double vel = 0;
  int head_on = 0, severe = 0;
  for (const auto& r : rollouts) {
    if (r.outcome != Outcome::Crash || !r.contact) continue;
    ++out.crashes;
    const double v = std::abs(r.contact->relative_speed);
    vel += v;
    if (is_head_on(*r.contact)) {
      ++head_on;
      if (v > kSevereSpeed) ++severe;
    }
  }
  const double n = static_cast<double>(rollouts.size());
  out.mean_velocity = out.crashes ? vel / out.crashes : 0.0;
  out.head_on_rate = head_on / n;
  out.severe_head_on_rate = severe / n;
  return out;
}

bool MetricsReport::operator==(const MetricsReport& o) const { return report_json(*this) == report_json(o); }

MetricsReport aggregate(const std::vector<RolloutRecord>& rollouts, const std::vector<Scenario>& bases,
                        std::string run_id) {
  if (rollouts.size() != bases.size()) throw ValidationError("aggregate: one base scenario per roll-out required");
  MetricsReport rep;
  rep.run_id = std::move(run_id);
  rep.n_episodes = static_cast<int>(rollouts.size());
  if (rollouts.empty()) return rep;
  const double n = static_cast<double>(rollouts.size());
  std::array<int, 4> counts{};
  RealismScore total;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    ++counts[static_cast<std::size_t>(rollouts[i].outcome)];
    const RealismScore r = realism(rollouts[i], bases[i]);
    total.yaw += r.yaw;
    total.acc += r.acc;
    total.road += r.road;
  }
  rep.rates.success = counts[static_cast<std::size_t>(Outcome::Success)] / n;
  rep.rates.crash = counts[static_cast<std::size_t>(Outcome::Crash)] / n;
  rep.rates.offroad = counts[static_cast<std::size_t>(Outcome::OutOfRoad)] / n;
  rep.rates.timeout = counts[static_cast<std::size_t>(Outcome::Timeout)] / n;
  rep.realism = {total.yaw / n, total.acc / n, total.road / n};
  rep.realism_mean = rep.realism.mean();
  rep.collision = collision_stats(rollouts);
  return rep;
}

std::string report_json(const MetricsReport& r) {
  json j;
  j["run_id"] = r.run_id;
  j["n_episodes"] = r.n_episodes;
  j["rates"] = {{"success", r.rates.success}, {"crash", r.rates.crash}, {"offroad", r.rates.offroad},
                {"timeout", r.rates.timeout}};
  j["realism"] = {{"yaw", r.realism.yaw}, {"acc", r.realism.acc}, {"road", r.realism.road}, {"mean", r.realism_mean}};
  j["collision"] = {{"mean_vel", r.collision.mean_velocity},
                    {"head_on", r.collision.head_on_rate},
                    {"severe_head_on", r.collision.severe_head_on_rate},
                    {"crashes", r.collision.crashes}};
  return j.dump(2);
}

MetricsReport parse_report(std::string_view text) {
  MetricsReport r;
  try {
    const json j = json::parse(text);
    r.run_id = j.at("run_id").get<std::string>();
    r.n_episodes = j.at("n_episodes").get<int>();
    const auto& rates = j.at("rates");
    r.rates = {rates.at("success").get<double>(), rates.at("crash").get<double>(), rates.at("offroad").get<double>(),
               rates.at("timeout").get<double>()};
    const auto& re = j.at("realism");
    r.realism = {re.at("yaw").get<double>(), re.at("acc").get<double>(), re.at("road").get<double>()};
    r.realism_mean = re.at("mean").get<double>();
    const auto& c = j.at("collision");
    r.collision.mean_velocity = c.at("mean_vel").get<double>();
    r.collision.head_on_rate = c.at("head_on").get<double>();
    r.collision.severe_head_on_rate = c.at("severe_head_on").get<double>();
    r.collision.crashes = c.value("crashes", 0);
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  return r;
}

namespace {

std::string fixed6(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::fixed, 6);
  return std::string(buf, end);
}

}  // namespace

std::string episodes_csv(const std::vector<RolloutRecord>& rollouts, const std::vector<Scenario>& bases) {
  if (rollouts.size() != bases.size()) throw ValidationError("episodes_csv: one base scenario per roll-out required");
  std::ostringstream out;
  out << "scenario_id,seed,outcome,term_step,yaw_wd,acc_wd,road_wd,realism,collision_velocity,head_on\n";
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const auto& r = rollouts[i];
    const RealismScore re = realism(r, bases[i]);
    const bool crash = r.outcome == Outcome::Crash && r.contact;
    out << r.scenario_id << ',' << r.seed << ',' << to_string(r.outcome) << ',' << r.term_step << ','
        << fixed6(re.yaw) << ',' << fixed6(re.acc) << ',' << fixed6(re.road) << ',' << fixed6(re.mean()) << ','
        << (crash ? fixed6(std::abs(r.contact->relative_speed)) : "") << ',' << (crash && is_head_on(*r.contact) ? 1 : 0)
        << '\n';
  }
  return out.str();
}

}  // namespace seal
