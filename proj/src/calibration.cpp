#include "natadv/calibration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "natadv/error.hpp"

namespace natadv {

double objective_mixed_error(std::span<const double> sim_gaps, std::span<const double> data_gaps) {
  if (sim_gaps.size() != data_gaps.size()) throw ShapeError("simulated and recorded gap series differ in length");
  if (data_gaps.empty()) throw ShapeError("empty gap series");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < data_gaps.size(); ++i) {
    const double d = std::abs(data_gaps[i]);
    if (!(d > 0.0)) throw DomainError("recorded gaps must be positive");
    const double e = data_gaps[i] - sim_gaps[i];
    num += e * e / d;
    den += d;
  }
  const auto n = static_cast<double>(data_gaps.size());
  return std::sqrt((num / n) / (den / n));
}

CalibrationSegment calibration_segment(const CarFollowingSegment& seg) {
  if (seg.ego.empty()) throw ShapeError("empty car-following segment");
  for (const auto& l : seg.leader) {
    if (!l) throw InvalidStateError("segment lacks leader records");
  }
  const auto& first = seg.ego.front();
  const auto& last = seg.ego.back();
  double ux = last.x - first.x, uy = last.y - first.y;
  const double norm = std::hypot(ux, uy);
  if (norm < 1e-9) {
    ux = 1.0;
    uy = 0.0;
  } else {
    ux /= norm;
    uy /= norm;
  }
  auto along = [&](double x, double y) { return (x - first.x) * ux + (y - first.y) * uy; };

  CalibrationSegment out;
  out.follower_front = 0.5 * first.length;
  out.follower_speed = first.speed;
  const std::size_t n = seg.ego.size();
  out.leader.rear_position.resize(n);
  out.leader.speed.resize(n);
  out.data_gaps.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& l = *seg.leader[i];
    out.leader.rear_position[i] = along(l.x, l.y) - 0.5 * l.length;
    out.leader.speed[i] = l.speed;
    const auto& e = seg.ego[i];
    out.data_gaps[i] = e.space_headway.value_or(std::hypot(l.x - e.x, l.y - e.y) - 0.5 * (l.length + e.length));
  }
  // Follower offset so that the first simulated gap equals the recorded one.
  out.follower_front = out.leader.rear_position[0] - out.data_gaps[0];
  return out;
}

void GaConfig::validate() const {
  if (population < 4) throw DomainError("GA population must be >= 4");
  if (generations < 1) throw DomainError("GA generations must be >= 1");
  if (tournament_k < 1) throw DomainError("tournament size must be >= 1");
  if (crossover_rate < 0 || crossover_rate > 1 || mutation_rate < 0 || mutation_rate > 1) {
    throw DomainError("GA rates must be probabilities");
  }
}

nlohmann::json to_json(const GaConfig& g) {
  return {{"population", g.population},     {"generations", g.generations},
          {"crossover_rate", g.crossover_rate}, {"mutation_rate", g.mutation_rate},
          {"tournament_k", g.tournament_k}, {"blend_alpha", g.blend_alpha},
          {"mutation_sigma_frac", g.mutation_sigma_frac}, {"seed", g.seed}};
}

GaConfig ga_from_json(const nlohmann::json& j, GaConfig g) {
  g.population = j.value("population", g.population);
  g.generations = j.value("generations", g.generations);
  g.crossover_rate = j.value("crossover_rate", g.crossover_rate);
  g.mutation_rate = j.value("mutation_rate", g.mutation_rate);
  g.tournament_k = j.value("tournament_k", g.tournament_k);
  g.blend_alpha = j.value("blend_alpha", g.blend_alpha);
  g.mutation_sigma_frac = j.value("mutation_sigma_frac", g.mutation_sigma_frac);
  g.seed = j.value("seed", g.seed);
  g.validate();
  return g;
}

double corpus_objective(const IdmParameters& p, const std::vector<CalibrationSegment>& corpus) {
  double total = 0.0;
  for (const auto& seg : corpus) {
    const auto sim = simulate_idm_follower(p, seg.leader, seg.follower_front, seg.follower_speed, seg.dt);
    total += objective_mixed_error(sim, seg.data_gaps);
  }
  return total / static_cast<double>(corpus.size());
}

namespace {

using Genome = std::array<double, 5>;  // a, v, s0, b, T

IdmParameters decode(const Genome& g) {
  IdmParameters p;
  p.a_max = g[0];
  p.v_desired = g[1];
  p.s0 = g[2];
  p.b_comfort = g[3];
  p.headway_T = g[4];
  p.delta = 4.0;
  return p;
}

}  // namespace

IdmCalibration calibrate_idm(const std::vector<CalibrationSegment>& corpus, const IdmRanges& r,
                             const GaConfig& ga) {
  if (corpus.empty()) throw DomainError("calibration corpus is empty");
  ga.validate();
  const Genome lo{r.a_lo, r.v_lo, r.s_lo, r.b_lo, r.t_lo};
  const Genome hi{r.a_hi, r.v_hi, r.s_hi, r.b_hi, r.t_hi};
  std::mt19937_64 rng(ga.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto pop_n = static_cast<std::size_t>(ga.population);

  std::vector<Genome> pop(pop_n);
  for (auto& g : pop) {
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = lo[k] + unit(rng) * (hi[k] - lo[k]);
  }
  std::vector<double> fit(pop_n);
  auto evaluate = [&]() {
    for (std::size_t i = 0; i < pop_n; ++i) fit[i] = corpus_objective(decode(pop[i]), corpus);
  };
  auto best_index = [&]() {
    return static_cast<std::size_t>(std::min_element(fit.begin(), fit.end()) - fit.begin());
  };
  auto tournament = [&]() {
    std::size_t best = static_cast<std::size_t>(unit(rng) * static_cast<double>(pop_n)) % pop_n;
    for (int k = 1; k < ga.tournament_k; ++k) {
      const std::size_t c = static_cast<std::size_t>(unit(rng) * static_cast<double>(pop_n)) % pop_n;
      if (fit[c] < fit[best]) best = c;
    }
    return best;
  };

  IdmCalibration out;
  out.corpus_size = corpus.size();
  evaluate();
  out.best_per_generation.push_back(fit[best_index()]);

  for (int gen = 1; gen < ga.generations; ++gen) {
    std::vector<Genome> next;
    next.reserve(pop_n);
    next.push_back(pop[best_index()]);
    while (next.size() < pop_n) {
      const Genome& p1 = pop[tournament()];
      const Genome& p2 = pop[tournament()];
      Genome c1 = p1, c2 = p2;
      if (unit(rng) < ga.crossover_rate) {
        for (std::size_t k = 0; k < c1.size(); ++k) {
          const double mn = std::min(p1[k], p2[k]);
          const double mx = std::max(p1[k], p2[k]);
          const double ext = ga.blend_alpha * (mx - mn);
          c1[k] = mn - ext + unit(rng) * (mx - mn + 2 * ext);
          c2[k] = mn - ext + unit(rng) * (mx - mn + 2 * ext);
        }
      }
      for (Genome* c : {&c1, &c2}) {
        for (std::size_t k = 0; k < c->size(); ++k) {
          if (unit(rng) < ga.mutation_rate) (*c)[k] += gauss(rng) * ga.mutation_sigma_frac * (hi[k] - lo[k]);
          (*c)[k] = std::clamp((*c)[k], lo[k], hi[k]);
        }
        if (next.size() < pop_n) next.push_back(*c);
      }
    }
    pop = std::move(next);
    evaluate();
    out.best_per_generation.push_back(fit[best_index()]);
  }
  out.params = decode(pop[best_index()]);
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(i);
  if (i + 1 >= values.size()) return values.back();
  return values[i] + frac * (values[i + 1] - values[i]);
}

MobilParameters calibrate_mobil(const std::vector<LaneChangeEvent>& events, double politeness_p) {
  if (events.empty()) {
    throw DomainError("no lane-change events to calibrate MOBIL; use the defaults (delta_a_th 0.2, max braking 2.0)");
  }
  MobilParameters m;
  m.politeness_p = politeness_p;
  std::vector<double> gains, braking;
  for (const auto& e : events) {
    const LaneChangeContext ctx{e.a_c, e.a_c_new, e.a_n, e.a_n_new, e.a_o, e.a_o_new};
    gains.push_back(mobil_incentive_gain(ctx, m));
    braking.push_back(-e.a_n_new);
  }
  m.delta_a_th = std::max(0.01, percentile(gains, 10.0));
  m.max_braking_imposed = std::max(0.1, percentile(braking, 90.0));
  return m;
}

nlohmann::json calibration_report(const IdmCalibration& c) {
  return {{"idm", to_json(c.params)}, {"loss_curve", c.best_per_generation}, {"corpus_size", c.corpus_size}};
}

}  // namespace natadv
