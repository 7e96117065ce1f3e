#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "compdiff/analytic.hpp"
#include "compdiff/model.hpp"

namespace compdiff {

using ModelPtr = std::shared_ptr<const Model>;

// Composition nodes are Models themselves, so trees nest arbitrarily and
// samplers see one score/energy interface. Energies compose only when every
// involved child has one; a composite exposes has_energy as the conjunction.
// All children of a node must share one noise schedule.
//
// Semantics per node (score S, energy E):
//   product:    S = sum S_i,  E = sum E_i
//   mixture:    posterior-weighted: w~_i(x) prop w_i exp(E_i); S = sum w~_i S_i,
//               E = logsumexp(log w_i + E_i). Requires energies at construction
//               (the weights need them), treating per-child normalizers as equal.
//   negation:   S = S_pos - alpha * S_neg, E likewise; alpha in (0, 1].
//   temper:     S = lambda * S_child, E likewise.
//   guidance:   S = S_prior + lambda * S_term; the term is a likelihood-ratio
//               model from guidance_term_explicit / guidance_term_implicit.
//   conditional product: S = S_uncond + sum_i (S_cond_i - S_uncond).
ModelPtr compose_product(std::vector<ModelPtr> children);
ModelPtr compose_mixture(std::vector<ModelPtr> children,
                         std::vector<double> weights,
                         std::vector<std::string> names = {});
ModelPtr compose_negation(ModelPtr positive, ModelPtr negative,
                          double alpha = 0.5);
ModelPtr compose_temper(ModelPtr child, double lambda);
ModelPtr compose_guidance(ModelPtr prior, ModelPtr likelihood_term,
                          double lambda);
ModelPtr compose_conditional_product(ModelPtr unconditional,
                                     std::vector<ModelPtr> conditionals);

// Classifier term log p_t(y | x) backed by the exact labeled-GMM posterior.
ModelPtr guidance_term_explicit(std::shared_ptr<const LabeledGmmModel> model,
                                int label);
// Classifier-free term: score(cond) - score(uncond); energy difference when
// both sides have energies.
ModelPtr guidance_term_implicit(ModelPtr conditional, ModelPtr unconditional);

// Unnormalized log density of the composed base (t = 0) distribution,
// applying each node's combination rule to the leaves' exact base
// densities. Throws CapabilityError when a leaf has no closed base density
// (neural models).
double base_log_density(const Model& tree, const Vec2& x);

// Exact mixture representation of the base distribution where the algebra
// yields one: GMM leaves, mixtures of representable children, products and
// tempers of single Gaussians. Empty otherwise (callers fall back to grid
// quadrature).
std::optional<Gmm> base_closed_form(const Model& tree);

// Serialization: nested JSON expression with leaves referenced by name.
// Parsing resolves names against the registry; serializing looks model
// pointers up in it. parse(serialize(t)) reproduces the same JSON.
using LeafRegistry = std::map<std::string, ModelPtr>;
nlohmann::ordered_json tree_to_json(const ModelPtr& tree,
                                    const LeafRegistry& registry);
ModelPtr tree_from_json(const nlohmann::ordered_json& spec,
                        const LeafRegistry& registry);

}  // namespace compdiff
