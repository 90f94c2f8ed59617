#include "natadv/nn.hpp"

#include <atomic>
#include <cmath>
#include <numbers>

#include "natadv/error.hpp"

namespace natadv {

namespace {
std::atomic<std::uint64_t> g_next_identity{1};
}

Mlp::Identity::Identity() : value(g_next_identity.fetch_add(1)) {}

void MlpSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) throw ShapeError("network dimensions must be >= 1");
  for (int h : hidden) {
    if (h < 1) throw ShapeError("hidden widths must be >= 1");
  }
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  int prev = input_dim;
  for (int h : hidden) {
    n += static_cast<std::size_t>(h) * static_cast<std::size_t>(prev + 1);
    prev = h;
  }
  n += static_cast<std::size_t>(output_dim) * static_cast<std::size_t>(prev + 1);
  return n;
}

Mlp::Mlp(MlpSpec spec, std::mt19937_64& rng, double output_gain) : spec_(std::move(spec)) {
  spec_.validate();
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec_.param_count()));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Index off = 0;
  int prev = spec_.input_dim;
  const std::size_t layers = spec_.hidden.size() + 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int out = l < spec_.hidden.size() ? spec_.hidden[l] : spec_.output_dim;
    const double scale = std::sqrt(2.0 / prev) * (l + 1 == layers ? output_gain : 1.0);
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(out) * prev; ++k) params_[off + k] = scale * gauss(rng);
    off += static_cast<Eigen::Index>(out) * (prev + 1);
    prev = out;
  }
}

Eigen::VectorXd& Mlp::mutable_params() {
  ++generation_;
  return params_;
}

void Mlp::set_params(const Eigen::VectorXd& p) {
  if (p.size() != params_.size()) throw ShapeError("parameter vector size mismatch");
  params_ = p;
  ++generation_;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache* cache) const {
  if (x.rows() != spec_.input_dim) {
    throw ShapeError("network input has " + std::to_string(x.rows()) + " rows, expected " +
                     std::to_string(spec_.input_dim));
  }
  if (cache) {
    cache->owner = id_.value;
    cache->generation = generation_;
    cache->inputs.clear();
  }
  Eigen::MatrixXd h = x;
  Eigen::Index off = 0;
  int prev = spec_.input_dim;
  const std::size_t layers = spec_.hidden.size() + 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int out = l < spec_.hidden.size() ? spec_.hidden[l] : spec_.output_dim;
    Eigen::Map<const Eigen::MatrixXd> W(params_.data() + off, out, prev);
    Eigen::Map<const Eigen::VectorXd> b(params_.data() + off + static_cast<Eigen::Index>(out) * prev, out);
    if (cache) cache->inputs.push_back(h);
    Eigen::MatrixXd z = W * h;
    z.colwise() += b;
    if (l + 1 < layers) z = z.cwiseMax(0.0);
    h = std::move(z);
    off += static_cast<Eigen::Index>(out) * (prev + 1);
    prev = out;
  }
  if (cache) cache->output = h;
  return h;
}

Eigen::VectorXd Mlp::forward_one(const Eigen::VectorXd& x) const {
  return forward(Eigen::MatrixXd(x)).col(0);
}

Eigen::VectorXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& grad_y) const {
  return backward(cache, grad_y, nullptr);
}

Eigen::VectorXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& grad_y, Eigen::MatrixXd* grad_x) const {
  if (cache.owner != id_.value || cache.generation != generation_ ||
      cache.inputs.size() != spec_.hidden.size() + 1) {
    throw InvalidStateError("stale forward cache: parameters changed since the forward pass");
  }
  if (grad_y.rows() != spec_.output_dim || grad_y.cols() != cache.output.cols()) {
    throw ShapeError("output gradient shape mismatch");
  }
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
  const std::size_t layers = spec_.hidden.size() + 1;
  std::vector<Eigen::Index> offsets(layers);
  std::vector<int> outs(layers), ins(layers);
  {
    Eigen::Index off = 0;
    int prev = spec_.input_dim;
    for (std::size_t l = 0; l < layers; ++l) {
      const int out = l < spec_.hidden.size() ? spec_.hidden[l] : spec_.output_dim;
      offsets[l] = off;
      outs[l] = out;
      ins[l] = prev;
      off += static_cast<Eigen::Index>(out) * (prev + 1);
      prev = out;
    }
  }
  Eigen::MatrixXd delta = grad_y;
  for (std::size_t li = layers; li-- > 0;) {
    const auto& in = cache.inputs[li];
    const Eigen::Index off = offsets[li];
    Eigen::Map<Eigen::MatrixXd> gW(grad.data() + off, outs[li], ins[li]);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + off + static_cast<Eigen::Index>(outs[li]) * ins[li], outs[li]);
    gW.noalias() = delta * in.transpose();
    gb = delta.rowwise().sum();
    if (li == 0 && !grad_x) break;
    Eigen::Map<const Eigen::MatrixXd> W(params_.data() + off, outs[li], ins[li]);
    Eigen::MatrixXd back = W.transpose() * delta;
    if (li == 0) {
      *grad_x = std::move(back);
      break;
    }
    // ReLU mask: the layer input is a post-activation, positive where active.
    delta = back.cwiseProduct((in.array() > 0.0).cast<double>().matrix());
  }
  return grad;
}

GaussianPolicy::GaussianPolicy(int input_dim, std::vector<int> hidden, int act_dim, std::mt19937_64& rng,
                               double initial_logvar)
    : net_(MlpSpec{input_dim, std::move(hidden), 2 * act_dim}, rng, 0.01), act_dim_(act_dim) {
  // Bias of the log-variance outputs sets the initial exploration noise.
  const auto n = net_.params().size();
  auto& p = net_.mutable_params();
  for (int i = 0; i < act_dim; ++i) p[n - act_dim + i] = initial_logvar;
}

GaussianPolicy::GaussianPolicy(Mlp net) : net_(std::move(net)), act_dim_(net_.spec().output_dim / 2) {
  if (net_.spec().output_dim % 2 != 0 || act_dim_ < 1) throw ShapeError("policy network output must be [mean; logvar]");
}

GaussianPolicy::Output GaussianPolicy::forward(const Eigen::MatrixXd& x, Mlp::Cache* cache) const {
  const Eigen::MatrixXd y = net_.forward(x, cache);
  Output o;
  o.mean = y.topRows(act_dim_);
  o.logvar = y.bottomRows(act_dim_).cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
  return o;
}

Eigen::VectorXd GaussianPolicy::backward(const Mlp::Cache& cache, const Eigen::MatrixXd& grad_mean,
                                         const Eigen::MatrixXd& grad_logvar, Eigen::MatrixXd* grad_x) const {
  Eigen::MatrixXd gy(2 * act_dim_, grad_mean.cols());
  gy.topRows(act_dim_) = grad_mean;
  const auto raw = cache.output.bottomRows(act_dim_).array();
  gy.bottomRows(act_dim_) = (raw >= kLogVarMin && raw <= kLogVarMax).cast<double>().matrix().cwiseProduct(grad_logvar);
  return net_.backward(cache, gy, grad_x);
}

double gaussian_logprob(const Eigen::VectorXd& mu, const Eigen::VectorXd& var, const Eigen::VectorXd& a) {
  if (mu.size() != var.size() || mu.size() != a.size()) throw ShapeError("gaussian_logprob dimension mismatch");
  double lp = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (!(var[i] > 0.0)) throw DomainError("variance must be positive");
    const double d = a[i] - mu[i];
    lp += -0.5 * std::log(2.0 * std::numbers::pi * var[i]) - d * d / (2.0 * var[i]);
  }
  return lp;
}

Eigen::VectorXd gaussian_sample(const Eigen::VectorXd& mu, const Eigen::VectorXd& var, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd a(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) a[i] = mu[i] + std::sqrt(std::max(var[i], 0.0)) * gauss(rng);
  return a;
}

double diag_gaussian_kl(const Eigen::VectorXd& mu_p, const Eigen::VectorXd& var_p, const Eigen::VectorXd& mu_q,
                        const Eigen::VectorXd& var_q) {
  if (mu_p.size() != var_p.size() || mu_q.size() != var_q.size() || mu_p.size() != mu_q.size()) {
    throw ShapeError("KL dimension mismatch");
  }
  double kl = 0.0;
  for (Eigen::Index i = 0; i < mu_p.size(); ++i) {
    if (!(var_p[i] > 0.0) || !(var_q[i] > 0.0)) throw DomainError("variance must be positive");
    const double d = mu_p[i] - mu_q[i];
    kl += 0.5 * (std::log(var_q[i] / var_p[i]) + (var_p[i] + d * d) / var_q[i] - 1.0);
  }
  return std::max(kl, 0.0);
}

AdamState::AdamState(std::size_t n, double learning_rate)
    : lr(learning_rate),
      m(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
      v(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& s) {
  if (grads.size() != params.size() || s.m.size() != params.size() || s.v.size() != params.size()) {
    throw ShapeError("Adam state, parameter and gradient sizes differ");
  }
  ++s.step;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grads;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  params.array() -= s.lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

nlohmann::json to_json(const MlpSpec& s) {
  return {{"input_dim", s.input_dim}, {"hidden", s.hidden}, {"output_dim", s.output_dim}, {"activation", "relu"}};
}

MlpSpec mlp_spec_from_json(const nlohmann::json& j) {
  MlpSpec s;
  s.input_dim = j.at("input_dim").get<int>();
  s.hidden = j.at("hidden").get<std::vector<int>>();
  s.output_dim = j.at("output_dim").get<int>();
  s.validate();
  return s;
}

nlohmann::json checkpoint_json(const Mlp& net) {
  const auto& p = net.params();
  return {{"format", "natadv-mlp"},
          {"version", 1},
          {"spec", to_json(net.spec())},
          {"params", std::vector<double>(p.data(), p.data() + p.size())}};
}

Mlp mlp_from_checkpoint(const nlohmann::json& j) {
  if (j.value("format", "") != "natadv-mlp" || j.value("version", 0) != 1) {
    throw SchemaError("unsupported network checkpoint format");
  }
  std::mt19937_64 rng(0);
  Mlp net(mlp_spec_from_json(j.at("spec")), rng);
  const auto v = j.at("params").get<std::vector<double>>();
  net.set_params(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  return net;
}

}  // namespace natadv
