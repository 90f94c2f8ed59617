#include "natadv/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "natadv/error.hpp"

namespace natadv {

void TrainingConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("gamma must be in (0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("lambda must be in [0, 1]");
  if (!(clip_eps > 0.0)) throw DomainError("clip epsilon must be positive");
  if (!(lr_actor > 0 && lr_critic > 0 && lr_discriminator > 0)) throw DomainError("learning rates must be positive");
  if (batch_size < 1 || epochs < 1 || minibatch < 1 || disc_minibatch < 1) throw DomainError("batch, epochs and minibatch sizes must be >= 1");
  if (max_episodes < 0) throw DomainError("max_episodes must be >= 0");
  if (!(initial_kl_M > 0.0)) throw DomainError("M must be positive");
  if (balance_w < 0.0) throw DomainError("balance weight must be non-negative");
}

nlohmann::json to_json(const TrainingConfig& c) {
  return {{"gamma", c.gamma},         {"lambda", c.lambda},
          {"clip_eps", c.clip_eps},   {"lr_critic", c.lr_critic},
          {"lr_actor", c.lr_actor},   {"lr_discriminator", c.lr_discriminator},
          {"batch_size", c.batch_size}, {"initial_kl_M", c.initial_kl_M},
          {"balance_w", c.balance_w}, {"max_episodes", c.max_episodes},
          {"epochs", c.epochs},       {"minibatch", c.minibatch}, {"disc_minibatch", c.disc_minibatch},
          {"hidden", c.hidden},       {"initial_logvar", c.initial_logvar},
          {"seed", c.seed}};
}

TrainingConfig training_from_json(const nlohmann::json& j, TrainingConfig c) {
  c.gamma = j.value("gamma", c.gamma);
  c.lambda = j.value("lambda", c.lambda);
  c.clip_eps = j.value("clip_eps", c.clip_eps);
  c.lr_critic = j.value("lr_critic", c.lr_critic);
  c.lr_actor = j.value("lr_actor", c.lr_actor);
  c.lr_discriminator = j.value("lr_discriminator", c.lr_discriminator);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.initial_kl_M = j.value("initial_kl_M", c.initial_kl_M);
  c.balance_w = j.value("balance_w", c.balance_w);
  c.max_episodes = j.value("max_episodes", c.max_episodes);
  c.epochs = j.value("epochs", c.epochs);
  c.minibatch = j.value("minibatch", c.minibatch);
  c.disc_minibatch = j.value("disc_minibatch", c.disc_minibatch);
  c.hidden = j.value("hidden", c.hidden);
  c.initial_logvar = j.value("initial_logvar", c.initial_logvar);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

GaeResult compute_gae(const RolloutBuffer& buffer, double gamma, double lambda) {
  if (buffer.empty()) throw InvalidStateError("cannot compute advantages of an empty buffer");
  const std::size_t n = buffer.size();
  GaeResult g;
  g.advantages.assign(n, 0.0);
  g.targets.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const auto& s = buffer.steps[t];
    const bool cut = s.done || s.truncated || t + 1 == n;
    const double bootstrap = s.done ? 0.0 : s.next_value;
    const double delta = s.reward + gamma * bootstrap - s.value;
    const double adv = delta + (cut ? 0.0 : gamma * lambda * next_adv);
    g.advantages[t] = adv;
    g.targets[t] = adv + s.value;
    next_adv = adv;
  }
  return g;
}

double critic_loss(const std::vector<double>& predicted, const std::vector<double>& targets) {
  if (predicted.size() != targets.size()) throw ShapeError("critic prediction/target length mismatch");
  if (predicted.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) s += (predicted[i] - targets[i]) * (predicted[i] - targets[i]);
  return s / static_cast<double>(predicted.size());
}

double clipped_surrogate(const std::vector<double>& lp_new, const std::vector<double>& lp_old,
                         const std::vector<double>& adv, double eps) {
  if (lp_new.size() != lp_old.size() || lp_new.size() != adv.size()) throw ShapeError("surrogate length mismatch");
  if (adv.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < adv.size(); ++i) {
    const double r = std::exp(lp_new[i] - lp_old[i]);
    s += std::min(r * adv[i], std::clamp(r, 1.0 - eps, 1.0 + eps) * adv[i]);
  }
  return -s / static_cast<double>(adv.size());
}

std::vector<double> clipped_surrogate_grad(const std::vector<double>& lp_new, const std::vector<double>& lp_old,
                                           const std::vector<double>& adv, double eps) {
  const std::size_t n = adv.size();
  std::vector<double> g(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::exp(lp_new[i] - lp_old[i]);
    const double unclipped = r * adv[i];
    const double clipped = std::clamp(r, 1.0 - eps, 1.0 + eps) * adv[i];
    if (unclipped <= clipped) g[i] = -unclipped / static_cast<double>(n);
  }
  return g;
}

Eigen::VectorXd batch_logprob(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& logvar, const Eigen::MatrixXd& a) {
  const Eigen::ArrayXXd d = a.array() - mean.array();
  const Eigen::ArrayXXd terms =
      -0.5 * (logvar.array() + std::log(2.0 * std::numbers::pi)) - d.square() * (-logvar.array()).exp() * 0.5;
  return terms.colwise().sum().transpose();
}

PpoAgent::PpoAgent(int obs_dim, int act_dim, const TrainingConfig& cfg, std::mt19937_64& rng)
    : actor(obs_dim, cfg.hidden, act_dim, rng, cfg.initial_logvar),
      critic(MlpSpec{obs_dim, cfg.hidden, 1}, rng, 1.0),
      actor_opt(static_cast<std::size_t>(actor.net().params().size()), cfg.lr_actor),
      critic_opt(static_cast<std::size_t>(critic.params().size()), cfg.lr_critic) {}

double PpoAgent::value(const Eigen::VectorXd& obs) const { return critic.forward_one(obs)[0]; }

RolloutCollector::RolloutCollector(Environment& env, std::uint64_t seed) : env_(env), seed_(seed) {}

std::uint64_t noise_seed(std::uint64_t seed, int episode, int step) {
  // splitmix64 over the packed key
  std::uint64_t z = seed ^ (static_cast<std::uint64_t>(episode) << 24) ^ static_cast<std::uint64_t>(step);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RolloutBuffer RolloutCollector::collect(const PpoAgent& agent, std::size_t n) {
  RolloutBuffer buf;
  buf.steps.reserve(n);
  const Eigen::VectorXd lo = env_.action_low();
  const Eigen::VectorXd hi = env_.action_high();
  for (std::size_t k = 0; k < n; ++k) {
    if (need_reset_) {
      obs_ = env_.reset(seed_ + static_cast<std::uint64_t>(episodes_));
      need_reset_ = false;
      running_return_ = 0.0;
      step_in_episode_ = 0;
    }
    std::mt19937_64 rng(noise_seed(seed_, episodes_, step_in_episode_++));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Transition tr;
    tr.obs = obs_;
    tr.aux = env_.auxiliary();
    const auto out = agent.actor.forward(Eigen::MatrixXd(obs_));
    tr.mean = out.mean.col(0);
    tr.logvar = out.logvar.col(0);
    tr.raw_action.resize(tr.mean.size());
    for (Eigen::Index i = 0; i < tr.mean.size(); ++i) {
      tr.raw_action[i] = tr.mean[i] + std::exp(0.5 * tr.logvar[i]) * gauss(rng);
    }
    tr.logprob = batch_logprob(Eigen::MatrixXd(tr.mean), Eigen::MatrixXd(tr.logvar), Eigen::MatrixXd(tr.raw_action))[0];
    tr.action = tr.raw_action.cwiseMax(lo).cwiseMin(hi);
    tr.value = agent.value(obs_);
    const StepResult r = env_.step(tr.action);
    tr.reward = tr.env_reward = r.reward;
    tr.done = r.done;
    tr.truncated = r.truncated && !r.done;
    tr.episode = episodes_;
    running_return_ += r.reward;
    if (r.done || r.truncated) {
      tr.next_value = r.done ? 0.0 : agent.value(r.obs);
      ++episodes_;
      returns_.push_back(running_return_);
      need_reset_ = true;
    } else {
      obs_ = r.obs;
      // Filled from the next transition's value; the last one needs its own.
      tr.next_value = k + 1 == n ? agent.value(r.obs) : 0.0;
    }
    buf.steps.push_back(std::move(tr));
  }
  for (std::size_t k = 0; k + 1 < buf.size(); ++k) {
    auto& s = buf.steps[k];
    if (!s.done && !s.truncated) s.next_value = buf.steps[k + 1].value;
  }
  return buf;
}

RolloutBuffer collect_rollouts(Environment& env, const PpoAgent& agent, std::size_t n, std::mt19937_64& rng) {
  RolloutCollector c(env, rng());
  return c.collect(agent, n);
}

namespace {

Eigen::MatrixXd gather_cols(const RolloutBuffer& b, const std::vector<std::size_t>& idx,
                            Eigen::VectorXd Transition::*field) {
  const auto rows = (b.steps[idx[0]].*field).size();
  Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = b.steps[idx[j]].*field;
  return m;
}

}  // namespace

UpdateStats ppo_update(PpoAgent& agent, RolloutBuffer& buffer, const TrainingConfig& cfg, std::mt19937_64& rng,
                       const ActorLossHook& extra) {
  UpdateStats st;
  const std::size_t n = buffer.size();
  if (n == 0) throw InvalidStateError("ppo_update on an empty buffer");
  const GaeResult gae = compute_gae(buffer, cfg.gamma, cfg.lambda);

  std::vector<double> adv = gae.advantages;
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  for (double& a : adv) a = sd > 1e-12 ? (a - mean) / sd : 0.0;

  for (const auto& s : buffer.steps) st.mean_reward += s.reward;
  st.mean_reward /= static_cast<double>(n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t mb = std::min<std::size_t>(static_cast<std::size_t>(cfg.minibatch), n);
  double actor_loss_sum = 0.0, critic_loss_sum = 0.0;
  int batches = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t end = std::min(n, start + mb);
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(end));
      const auto m = static_cast<Eigen::Index>(idx.size());
      const Eigen::MatrixXd obs = gather_cols(buffer, idx, &Transition::obs);
      const Eigen::MatrixXd act = gather_cols(buffer, idx, &Transition::raw_action);

      // Actor.
      Mlp::Cache acache;
      const auto out = agent.actor.forward(obs, &acache);
      const Eigen::VectorXd lp = batch_logprob(out.mean, out.logvar, act);
      std::vector<double> lp_new(idx.size()), lp_old(idx.size()), a_mb(idx.size());
      for (std::size_t j = 0; j < idx.size(); ++j) {
        lp_new[j] = lp[static_cast<Eigen::Index>(j)];
        lp_old[j] = buffer.steps[idx[j]].logprob;
        a_mb[j] = adv[idx[j]];
      }
      actor_loss_sum += clipped_surrogate(lp_new, lp_old, a_mb, cfg.clip_eps);
      const auto dlp = clipped_surrogate_grad(lp_new, lp_old, a_mb, cfg.clip_eps);
      const Eigen::ArrayXXd d = act.array() - out.mean.array();
      const Eigen::ArrayXXd inv_var = (-out.logvar.array()).exp();
      Eigen::RowVectorXd w(m);
      for (Eigen::Index j = 0; j < m; ++j) w[j] = dlp[static_cast<std::size_t>(j)];
      Eigen::MatrixXd g_mean = (d * inv_var).matrix() * w.asDiagonal();
      Eigen::MatrixXd g_logvar = (-0.5 + 0.5 * d.square() * inv_var).matrix() * w.asDiagonal();
      if (extra) extra(buffer, idx, out, sd > 1e-12 ? 1.0 / sd : 1.0, g_mean, g_logvar);
      const Eigen::VectorXd ga = agent.actor.backward(acache, g_mean, g_logvar);
      adam_step(agent.actor.net().mutable_params(), ga, agent.actor_opt);

      // Critic.
      Mlp::Cache ccache;
      const Eigen::MatrixXd v = agent.critic.forward(obs, &ccache);
      Eigen::MatrixXd gv(1, m);
      double closs = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        const double e = v(0, j) - gae.targets[idx[static_cast<std::size_t>(j)]];
        closs += e * e;
        gv(0, j) = 2.0 * e / static_cast<double>(m);
      }
      critic_loss_sum += closs / static_cast<double>(m);
      const Eigen::VectorXd gc = agent.critic.backward(ccache, gv);
      adam_step(agent.critic.mutable_params(), gc, agent.critic_opt);
      ++batches;
    }
  }
  st.actor_loss = actor_loss_sum / batches;
  st.critic_loss = critic_loss_sum / batches;

  // KL(old || new) over the whole buffer.
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  const Eigen::MatrixXd obs = gather_cols(buffer, all, &Transition::obs);
  const auto out = agent.actor.forward(obs);
  double kl = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const auto& s = buffer.steps[j];
    const auto c = static_cast<Eigen::Index>(j);
    kl += diag_gaussian_kl(s.mean, s.logvar.array().exp().matrix(), out.mean.col(c),
                           out.logvar.col(c).array().exp().matrix());
  }
  st.mean_kl = kl / static_cast<double>(n);
  buffer.clear();
  return st;
}

TrainingResult train_ppo(Environment& env, PpoAgent& agent, const TrainingConfig& cfg, std::mt19937_64& rng,
                         const PpoHooks& hooks) {
  cfg.validate();
  RolloutCollector collector(env, cfg.seed);
  TrainingResult res;
  int update = 0;
  while (collector.episodes_completed() < cfg.max_episodes) {
    RolloutBuffer buf = collector.collect(agent, static_cast<std::size_t>(cfg.batch_size));
    if (hooks.before_update) hooks.before_update(buf);
    UpdateStats st = ppo_update(agent, buf, cfg, rng, hooks.actor_extra);
    st.update = update++;
    st.episodes = collector.episodes_completed();
    if (hooks.after_update) hooks.after_update(st);
    res.updates.push_back(st);
  }
  res.episode_returns = collector.episode_returns();
  return res;
}

std::string training_log_csv(const std::vector<UpdateStats>& updates) {
  std::string out = "update_idx,actor_loss,critic_loss,mean_reward,mean_KL\n";
  char line[256];
  for (const auto& u : updates) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g\n", u.update, u.actor_loss, u.critic_loss,
                  u.mean_reward, u.mean_kl);
    out += line;
  }
  return out;
}

}  // namespace natadv
