#include "compdiff/compose.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <utility>

#include "compdiff/errors.hpp"

namespace compdiff {
namespace {

using json = nlohmann::ordered_json;

bool same_schedule(const NoiseSchedule& a, const NoiseSchedule& b) {
  if (a.steps() != b.steps() || a.kind() != b.kind()) return false;
  for (int t = 1; t <= a.steps(); ++t)
    if (a.beta(t) != b.beta(t)) return false;
  return true;
}

void require_children(const std::vector<ModelPtr>& cs, const char* what) {
  if (cs.empty()) throw ConfigError(std::string(what) + ": no children");
  for (const auto& c : cs) {
    if (!c) throw ConfigError(std::string(what) + ": null child");
    if (!same_schedule(cs.front()->schedule(), c->schedule()))
      throw ConfigError(std::string(what) +
                        ": children must share one noise schedule");
  }
}

bool all_have_energy(const std::vector<ModelPtr>& cs) {
  return std::all_of(cs.begin(), cs.end(),
                     [](const ModelPtr& c) { return c->has_energy(); });
}

// Common storage: children pinned by shared_ptr, schedule borrowed from the
// first child, has_energy precomputed as the conjunction.
class CompositeModel : public Model {
 public:
  CompositeModel(std::vector<ModelPtr> children, const char* what)
      : children_(std::move(children)) {
    require_children(children_, what);
    sched_ = &children_.front()->schedule();
    has_energy_ = all_have_energy(children_);
  }

  const NoiseSchedule& schedule() const override { return *sched_; }
  bool has_energy() const override { return has_energy_; }

  double energy(const Vec2& x, int t) const override {
    if (!has_energy_)
      throw CapabilityError(
          "composed energy unavailable: some leaf exposes no energy");
    return energy_impl(x, t);
  }

  const std::vector<ModelPtr>& children() const { return children_; }

 protected:
  virtual double energy_impl(const Vec2& x, int t) const = 0;

  std::vector<ModelPtr> children_;
  const NoiseSchedule* sched_ = nullptr;
  bool has_energy_ = false;
};

class ProductModel final : public CompositeModel {
 public:
  explicit ProductModel(std::vector<ModelPtr> cs)
      : CompositeModel(std::move(cs), "product") {}

  Vec2 score(const Vec2& x, int t) const override {
    Vec2 s{0, 0};
    for (const auto& c : children_) s += c->score(x, t);
    return s;
  }
  void score_batch(const Vec2* xs, int n, int t, Vec2* out) const override {
    std::fill(out, out + n, Vec2{0, 0});
    std::vector<Vec2> tmp(n);
    for (const auto& c : children_) {
      c->score_batch(xs, n, t, tmp.data());
      for (int i = 0; i < n; ++i) out[i] += tmp[i];
    }
  }

 protected:
  double energy_impl(const Vec2& x, int t) const override {
    double e = 0;
    for (const auto& c : children_) e += c->energy(x, t);
    return e;
  }
};

class MixtureModel final : public CompositeModel {
 public:
  MixtureModel(std::vector<ModelPtr> cs, std::vector<double> weights,
               std::vector<std::string> names)
      : CompositeModel(std::move(cs), "mixture") {
    if (weights.size() != children_.size())
      throw ConfigError("mixture: weight count does not match children");
    double total = 0;
    for (double w : weights) {
      if (!(w >= 0) || !std::isfinite(w))
        throw ConfigError("mixture: weights must be finite and nonnegative");
      total += w;
    }
    if (std::fabs(total - 1.0) > 1e-9)
      throw ConfigError("mixture: weights must sum to 1, got " +
                        std::to_string(total));
    for (std::size_t i = 0; i < children_.size(); ++i) {
      if (!children_[i]->has_energy()) {
        const std::string label =
            i < names.size() ? "\"" + names[i] + "\"" : "#" + std::to_string(i);
        throw CapabilityError(
            "mixture: posterior weights need energies, but child " + label +
            " exposes none");
      }
    }
    log_w_.reserve(weights.size());
    for (double w : weights)
      log_w_.push_back(w > 0 ? std::log(w) : -1e300);
    weights_ = std::move(weights);
  }

  Vec2 score(const Vec2& x, int t) const override {
    Vec2 s;
    (void)eval(x, t, &s);
    return s;
  }

  void score_batch(const Vec2* xs, int n, int t, Vec2* out) const override {
    batch(xs, n, t, nullptr, out);
  }
  void energy_score_batch(const Vec2* xs, int n, int t, double* e_out,
                          Vec2* s_out) const override {
    batch(xs, n, t, e_out, s_out);
  }

  const std::vector<double>& weights() const { return weights_; }

 protected:
  double energy_impl(const Vec2& x, int t) const override {
    return eval(x, t, nullptr);
  }

 private:
  // Responsibility-weighted combination in one pass; returns the composed
  // energy logsumexp(log w_i + E_i).
  double eval(const Vec2& x, int t, Vec2* score_out) const {
    const std::size_t k = children_.size();
    double le[16];
    Vec2 sc[16];
    std::vector<double> le_v;
    std::vector<Vec2> sc_v;
    double* les = le;
    Vec2* scs = sc;
    if (k > 16) {
      le_v.resize(k);
      sc_v.resize(k);
      les = le_v.data();
      scs = sc_v.data();
    }
    double mx = -1e300;
    for (std::size_t i = 0; i < k; ++i) {
      les[i] = log_w_[i] + children_[i]->energy(x, t);
      if (score_out) scs[i] = children_[i]->score(x, t);
      mx = std::fmax(mx, les[i]);
    }
    double z = 0;
    for (std::size_t i = 0; i < k; ++i) z += std::exp(les[i] - mx);
    if (score_out) {
      Vec2 s{0, 0};
      for (std::size_t i = 0; i < k; ++i)
        s += scs[i] * (std::exp(les[i] - mx) / z);
      *score_out = s;
    }
    return mx + std::log(z);
  }

  void batch(const Vec2* xs, int n, int t, double* e_out, Vec2* s_out) const {
    const std::size_t k = children_.size();
    std::vector<double> es(std::size_t(n) * k);
    std::vector<Vec2> ss(std::size_t(n) * k);
    for (std::size_t i = 0; i < k; ++i)
      children_[i]->energy_score_batch(xs, n, t, es.data() + i * n,
                                       ss.data() + i * n);
    for (int j = 0; j < n; ++j) {
      double mx = -1e300;
      for (std::size_t i = 0; i < k; ++i)
        mx = std::fmax(mx, log_w_[i] + es[i * n + j]);
      double z = 0;
      for (std::size_t i = 0; i < k; ++i)
        z += std::exp(log_w_[i] + es[i * n + j] - mx);
      Vec2 s{0, 0};
      for (std::size_t i = 0; i < k; ++i)
        s += ss[i * n + j] * (std::exp(log_w_[i] + es[i * n + j] - mx) / z);
      if (s_out) s_out[j] = s;
      if (e_out) e_out[j] = mx + std::log(z);
    }
  }

  std::vector<double> weights_;
  std::vector<double> log_w_;
};

class NegationModel final : public CompositeModel {
 public:
  NegationModel(ModelPtr pos, ModelPtr neg, double alpha)
      : CompositeModel({std::move(pos), std::move(neg)}, "negation"),
        alpha_(alpha) {
    if (!(alpha > 0.0) || alpha > 1.0 || !std::isfinite(alpha))
      throw ConfigError(
          "negation: alpha must lie in (0, 1]; for the alpha -> 0 limit use "
          "the positive child directly");
  }

  Vec2 score(const Vec2& x, int t) const override {
    return children_[0]->score(x, t) - children_[1]->score(x, t) * alpha_;
  }
  void score_batch(const Vec2* xs, int n, int t, Vec2* out) const override {
    std::vector<Vec2> neg(n);
    children_[0]->score_batch(xs, n, t, out);
    children_[1]->score_batch(xs, n, t, neg.data());
    for (int i = 0; i < n; ++i) out[i] -= neg[i] * alpha_;
  }
  double alpha() const { return alpha_; }

 protected:
  double energy_impl(const Vec2& x, int t) const override {
    return children_[0]->energy(x, t) - alpha_ * children_[1]->energy(x, t);
  }

 private:
  double alpha_;
};

class TemperModel final : public CompositeModel {
 public:
  TemperModel(ModelPtr child, double lambda)
      : CompositeModel({std::move(child)}, "temper"), lambda_(lambda) {
    if (!std::isfinite(lambda)) throw ConfigError("temper: lambda must be finite");
  }

  Vec2 score(const Vec2& x, int t) const override {
    return children_[0]->score(x, t) * lambda_;
  }
  void score_batch(const Vec2* xs, int n, int t, Vec2* out) const override {
    children_[0]->score_batch(xs, n, t, out);
    for (int i = 0; i < n; ++i) out[i] = out[i] * lambda_;
  }
  double lambda() const { return lambda_; }

 protected:
  double energy_impl(const Vec2& x, int t) const override {
    return lambda_ * children_[0]->energy(x, t);
  }

 private:
  double lambda_;
};

class GuidanceModel final : public CompositeModel {
 public:
  GuidanceModel(ModelPtr prior, ModelPtr term, double lambda)
      : CompositeModel({std::move(prior), std::move(term)}, "guidance"),
        lambda_(lambda) {
    if (!std::isfinite(lambda))
      throw ConfigError("guidance: lambda must be finite");
  }

  Vec2 score(const Vec2& x, int t) const override {
    return children_[0]->score(x, t) + children_[1]->score(x, t) * lambda_;
  }
  void score_batch(const Vec2* xs, int n, int t, Vec2* out) const override {
    std::vector<Vec2> term(n);
    children_[0]->score_batch(xs, n, t, out);
    children_[1]->score_batch(xs, n, t, term.data());
    for (int i = 0; i < n; ++i) out[i] += term[i] * lambda_;
  }
  double lambda() const { return lambda_; }

 protected:
  double energy_impl(const Vec2& x, int t) const override {
    return children_[0]->energy(x, t) + lambda_ * children_[1]->energy(x, t);
  }

 private:
  double lambda_;
};

class CondProductModel final : public CompositeModel {
 public:
  CondProductModel(ModelPtr uncond, std::vector<ModelPtr> conds)
      : CompositeModel(prepend(std::move(uncond), std::move(conds)),
                       "conditional product") {
    if (children_.size() < 2)
      throw ConfigError("conditional product: need at least one conditional");
  }

  Vec2 score(const Vec2& x, int t) const override {
    const double k = double(children_.size()) - 1.0;
    Vec2 s = children_[0]->score(x, t) * (1.0 - k);
    for (std::size_t i = 1; i < children_.size(); ++i)
      s += children_[i]->score(x, t);
    return s;
  }
  void score_batch(const Vec2* xs, int n, int t, Vec2* out) const override {
    const double k = double(children_.size()) - 1.0;
    children_[0]->score_batch(xs, n, t, out);
    for (int i = 0; i < n; ++i) out[i] = out[i] * (1.0 - k);
    std::vector<Vec2> tmp(n);
    for (std::size_t c = 1; c < children_.size(); ++c) {
      children_[c]->score_batch(xs, n, t, tmp.data());
      for (int i = 0; i < n; ++i) out[i] += tmp[i];
    }
  }

 protected:
  double energy_impl(const Vec2& x, int t) const override {
    const double k = double(children_.size()) - 1.0;
    double e = (1.0 - k) * children_[0]->energy(x, t);
    for (std::size_t i = 1; i < children_.size(); ++i)
      e += children_[i]->energy(x, t);
    return e;
  }

 private:
  static std::vector<ModelPtr> prepend(ModelPtr head, std::vector<ModelPtr> tail) {
    std::vector<ModelPtr> all;
    all.reserve(tail.size() + 1);
    all.push_back(std::move(head));
    for (auto& c : tail) all.push_back(std::move(c));
    return all;
  }
};

// log p_t(y | x) from the exact labeled-GMM posterior. Normalized, so it is
// a genuine energy.
class ExplicitTermModel final : public Model {
 public:
  ExplicitTermModel(std::shared_ptr<const LabeledGmmModel> m, int label)
      : model_(std::move(m)), label_(label) {
    if (!model_) throw ConfigError("classifier term: null model");
    (void)model_->class_prior(label_);  // validates the label
  }

  const NoiseSchedule& schedule() const override { return model_->schedule(); }
  bool has_energy() const override { return true; }
  Vec2 score(const Vec2& x, int t) const override {
    return model_->posterior_score(label_, x, t);
  }
  double energy(const Vec2& x, int t) const override {
    return model_->log_posterior(label_, x, t);
  }

  const std::shared_ptr<const LabeledGmmModel>& model() const { return model_; }
  int label() const { return label_; }

 private:
  std::shared_ptr<const LabeledGmmModel> model_;
  int label_;
};

// Classifier-free term: difference of conditional and unconditional models.
class ImplicitTermModel final : public CompositeModel {
 public:
  ImplicitTermModel(ModelPtr cond, ModelPtr uncond)
      : CompositeModel({std::move(cond), std::move(uncond)},
                       "classifier-free term") {}

  Vec2 score(const Vec2& x, int t) const override {
    return children_[0]->score(x, t) - children_[1]->score(x, t);
  }
  void score_batch(const Vec2* xs, int n, int t, Vec2* out) const override {
    std::vector<Vec2> u(n);
    children_[0]->score_batch(xs, n, t, out);
    children_[1]->score_batch(xs, n, t, u.data());
    for (int i = 0; i < n; ++i) out[i] -= u[i];
  }

 protected:
  double energy_impl(const Vec2& x, int t) const override {
    return children_[0]->energy(x, t) - children_[1]->energy(x, t);
  }
};

}  // namespace

ModelPtr compose_product(std::vector<ModelPtr> children) {
  return std::make_shared<ProductModel>(std::move(children));
}

ModelPtr compose_mixture(std::vector<ModelPtr> children,
                         std::vector<double> weights,
                         std::vector<std::string> names) {
  return std::make_shared<MixtureModel>(std::move(children), std::move(weights),
                                        std::move(names));
}

ModelPtr compose_negation(ModelPtr positive, ModelPtr negative, double alpha) {
  return std::make_shared<NegationModel>(std::move(positive),
                                         std::move(negative), alpha);
}

ModelPtr compose_temper(ModelPtr child, double lambda) {
  return std::make_shared<TemperModel>(std::move(child), lambda);
}

ModelPtr compose_guidance(ModelPtr prior, ModelPtr likelihood_term,
                          double lambda) {
  return std::make_shared<GuidanceModel>(std::move(prior),
                                         std::move(likelihood_term), lambda);
}

ModelPtr compose_conditional_product(ModelPtr unconditional,
                                     std::vector<ModelPtr> conditionals) {
  return std::make_shared<CondProductModel>(std::move(unconditional),
                                            std::move(conditionals));
}

ModelPtr guidance_term_explicit(std::shared_ptr<const LabeledGmmModel> model,
                                int label) {
  return std::make_shared<ExplicitTermModel>(std::move(model), label);
}

ModelPtr guidance_term_implicit(ModelPtr conditional, ModelPtr unconditional) {
  return std::make_shared<ImplicitTermModel>(std::move(conditional),
                                             std::move(unconditional));
}

double base_log_density(const Model& m, const Vec2& x) {
  // Leaves first: analytic models know their exact base density.
  if (auto* a = dynamic_cast<const AnalyticModel*>(&m))
    return a->log_density(x, 0);
  if (auto* p = dynamic_cast<const ProductModel*>(&m)) {
    double e = 0;
    for (const auto& c : p->children()) e += base_log_density(*c, x);
    return e;
  }
  if (auto* p = dynamic_cast<const MixtureModel*>(&m)) {
    // Children are normalized at t = 0 (analytic leaves), so the mixture
    // weights keep their meaning.
    double mx = -1e300;
    std::vector<double> le(p->children().size());
    for (std::size_t i = 0; i < p->children().size(); ++i) {
      const double w = p->weights()[i];
      le[i] = (w > 0 ? std::log(w) : -1e300) +
              base_log_density(*p->children()[i], x);
      mx = std::fmax(mx, le[i]);
    }
    double z = 0;
    for (double v : le) z += std::exp(v - mx);
    return mx + std::log(z);
  }
  if (auto* p = dynamic_cast<const NegationModel*>(&m))
    return base_log_density(*p->children()[0], x) -
           p->alpha() * base_log_density(*p->children()[1], x);
  if (auto* p = dynamic_cast<const TemperModel*>(&m))
    return p->lambda() * base_log_density(*p->children()[0], x);
  if (auto* p = dynamic_cast<const GuidanceModel*>(&m))
    return base_log_density(*p->children()[0], x) +
           p->lambda() * base_log_density(*p->children()[1], x);
  if (auto* p = dynamic_cast<const CondProductModel*>(&m)) {
    const double k = double(p->children().size()) - 1.0;
    double e = (1.0 - k) * base_log_density(*p->children()[0], x);
    for (std::size_t i = 1; i < p->children().size(); ++i)
      e += base_log_density(*p->children()[i], x);
    return e;
  }
  if (auto* p = dynamic_cast<const ExplicitTermModel*>(&m))
    return p->model()->log_posterior(p->label(), x, 0);
  if (auto* p = dynamic_cast<const ImplicitTermModel*>(&m))
    return base_log_density(*p->children()[0], x) -
           base_log_density(*p->children()[1], x);
  throw CapabilityError(
      "base density: leaf exposes no closed-form t=0 density");
}

std::optional<Gmm> base_closed_form(const Model& m) {
  if (auto* g = dynamic_cast<const GmmModel*>(&m)) return g->base();
  if (auto* l = dynamic_cast<const LabeledGmmModel*>(&m))
    return l->pooled().base();
  if (auto* p = dynamic_cast<const MixtureModel*>(&m)) {
    std::vector<GaussComp> pool;
    for (std::size_t i = 0; i < p->children().size(); ++i) {
      const auto child = base_closed_form(*p->children()[i]);
      if (!child) return std::nullopt;
      for (const auto& c : child->comps())
        pool.push_back({p->weights()[i] * c.w, c.mean, c.cov});
    }
    return Gmm(std::move(pool));
  }
  if (auto* p = dynamic_cast<const ProductModel*>(&m)) {
    // Products close only over single Gaussians: precisions add.
    Sym2 prec{0, 0, 0};
    Vec2 h{0, 0};
    for (const auto& c : p->children()) {
      const auto child = base_closed_form(*c);
      if (!child || child->size() != 1) return std::nullopt;
      const Sym2 pi = child->comp(0).cov.inverse();
      prec.a += pi.a;
      prec.b += pi.b;
      prec.c += pi.c;
      h += pi.mul(child->comp(0).mean);
    }
    const Sym2 cov = prec.inverse();
    return Gmm({{1.0, cov.mul(h), cov}});
  }
  if (auto* p = dynamic_cast<const TemperModel*>(&m)) {
    const auto child = base_closed_form(*p->children()[0]);
    const double lam = p->lambda();
    if (!child || child->size() != 1 || !(lam > 0)) return std::nullopt;
    const Sym2 s = child->comp(0).cov;
    return Gmm({{1.0, child->comp(0).mean, {s.a / lam, s.b / lam, s.c / lam}}});
  }
  return std::nullopt;
}

namespace {

std::string leaf_name(const ModelPtr& m, const LeafRegistry& reg) {
  for (const auto& [name, p] : reg)
    if (p.get() == m.get()) return name;
  throw ConfigError(
      "tree serialization: leaf model is not in the registry; register every "
      "leaf under a name first");
}

json children_json(const std::vector<ModelPtr>& cs, const LeafRegistry& reg) {
  json arr = json::array();
  for (const auto& c : cs) arr.push_back(tree_to_json(c, reg));
  return arr;
}

}  // namespace

json tree_to_json(const ModelPtr& tree, const LeafRegistry& reg) {
  if (!tree) throw ConfigError("tree serialization: null node");
  if (auto* p = dynamic_cast<const ProductModel*>(tree.get()))
    return json{{"product", children_json(p->children(), reg)}};
  if (auto* p = dynamic_cast<const MixtureModel*>(tree.get()))
    return json{{"mixture", {{"children", children_json(p->children(), reg)},
                             {"weights", p->weights()}}}};
  if (auto* p = dynamic_cast<const NegationModel*>(tree.get()))
    return json{{"negation", {{"positive", tree_to_json(p->children()[0], reg)},
                              {"negative", tree_to_json(p->children()[1], reg)},
                              {"alpha", p->alpha()}}}};
  if (auto* p = dynamic_cast<const TemperModel*>(tree.get()))
    return json{{"temper", {{"child", tree_to_json(p->children()[0], reg)},
                            {"lambda", p->lambda()}}}};
  if (auto* p = dynamic_cast<const GuidanceModel*>(tree.get()))
    return json{{"guidance", {{"prior", tree_to_json(p->children()[0], reg)},
                              {"term", tree_to_json(p->children()[1], reg)},
                              {"lambda", p->lambda()}}}};
  if (auto* p = dynamic_cast<const CondProductModel*>(tree.get())) {
    json conds = json::array();
    for (std::size_t i = 1; i < p->children().size(); ++i)
      conds.push_back(tree_to_json(p->children()[i], reg));
    return json{{"conditional_product",
                 {{"unconditional", tree_to_json(p->children()[0], reg)},
                  {"conditionals", conds}}}};
  }
  if (auto* p = dynamic_cast<const ExplicitTermModel*>(tree.get())) {
    ModelPtr base = p->model();
    return json{{"classifier", {{"model", leaf_name(base, reg)},
                                {"label", p->label()}}}};
  }
  if (auto* p = dynamic_cast<const ImplicitTermModel*>(tree.get()))
    return json{{"classifier_free",
                 {{"conditional", tree_to_json(p->children()[0], reg)},
                  {"unconditional", tree_to_json(p->children()[1], reg)}}}};
  return json{{"leaf", leaf_name(tree, reg)}};
}

ModelPtr tree_from_json(const json& spec, const LeafRegistry& reg) {
  if (!spec.is_object() || spec.size() != 1)
    throw ConfigError(
        "tree spec: each node must be an object with exactly one key (the "
        "node kind), got " + spec.dump());
  const std::string kind = spec.begin().key();
  const json& body = spec.begin().value();

  auto parse_children = [&](const json& arr) {
    if (!arr.is_array() || arr.empty())
      throw ConfigError("tree spec: \"" + kind +
                        "\" needs a nonempty child array");
    std::vector<ModelPtr> cs;
    for (const auto& c : arr) cs.push_back(tree_from_json(c, reg));
    return cs;
  };
  auto need = [&](const char* field) -> const json& {
    if (!body.is_object() || !body.contains(field))
      throw ConfigError("tree spec: \"" + kind + "\" needs field \"" + field +
                        "\"");
    return body.at(field);
  };

  if (kind == "leaf") {
    if (!body.is_string())
      throw ConfigError("tree spec: \"leaf\" takes a model name string");
    const auto it = reg.find(body.get<std::string>());
    if (it == reg.end())
      throw ConfigError("tree spec: unknown leaf \"" + body.get<std::string>() +
                        "\"");
    return it->second;
  }
  if (kind == "product") return compose_product(parse_children(body));
  if (kind == "mixture") {
    auto cs = parse_children(need("children"));
    std::vector<double> w = need("weights").get<std::vector<double>>();
    std::vector<std::string> names;
    for (const auto& c : need("children"))
      names.push_back(c.contains("leaf") ? c.at("leaf").get<std::string>()
                                         : c.begin().key());
    return compose_mixture(std::move(cs), std::move(w), std::move(names));
  }
  if (kind == "negation")
    return compose_negation(tree_from_json(need("positive"), reg),
                            tree_from_json(need("negative"), reg),
                            body.contains("alpha")
                                ? body.at("alpha").get<double>()
                                : 0.5);
  if (kind == "temper")
    return compose_temper(tree_from_json(need("child"), reg),
                          need("lambda").get<double>());
  if (kind == "guidance")
    return compose_guidance(tree_from_json(need("prior"), reg),
                            tree_from_json(need("term"), reg),
                            need("lambda").get<double>());
  if (kind == "conditional_product") {
    auto conds = parse_children(need("conditionals"));
    return compose_conditional_product(
        tree_from_json(need("unconditional"), reg), std::move(conds));
  }
  if (kind == "classifier") {
    const auto it = reg.find(need("model").get<std::string>());
    if (it == reg.end())
      throw ConfigError("tree spec: unknown classifier model \"" +
                        need("model").get<std::string>() + "\"");
    auto labeled =
        std::dynamic_pointer_cast<const LabeledGmmModel>(it->second);
    if (!labeled)
      throw ConfigError("tree spec: classifier model \"" +
                        need("model").get<std::string>() +
                        "\" is not a labeled mixture");
    return guidance_term_explicit(labeled, need("label").get<int>());
  }
  if (kind == "classifier_free")
    return guidance_term_implicit(tree_from_json(need("conditional"), reg),
                                  tree_from_json(need("unconditional"), reg));
  throw ConfigError("tree spec: unknown node kind \"" + kind + "\"");
}

}  // namespace compdiff
