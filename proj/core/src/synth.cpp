#include "potemkin/synth.hpp"

#include <sstream>

#include "potemkin/errors.hpp"
#include "potemkin/rng.hpp"

namespace potemkin {

namespace {

std::string padded_instance_id(std::size_t index, std::size_t n) {
  std::size_t width = 1;
  for (std::size_t v = n > 0 ? n - 1 : 0; v >= 10; v /= 10) ++width;
  std::string digits = std::to_string(index);
  std::string out = "x";
  out.append(width > digits.size() ? width - digits.size() : 0, '0');
  out += digits;
  return out;
}

}  // namespace

ConceptSpec gen_human_space(const HumanSpaceParams& params) {
  if (params.n_instances == 0) {
    throw Error("gen_human_space: n_instances must be >= 1");
  }
  if (params.flip_block_size == 0) {
    throw Error("gen_human_space: flip_block_size must be >= 1");
  }
  if (params.n_rules * params.flip_block_size > params.n_instances) {
    throw Error("gen_human_space: n_rules * flip_block_size exceeds n_instances");
  }

  std::vector<Instance> instances;
  instances.reserve(params.n_instances);
  for (std::size_t i = 0; i < params.n_instances; ++i) {
    std::string id = padded_instance_id(i, params.n_instances);
    instances.push_back(Instance{id, id});
  }

  Interpretation f_star;
  f_star.interp_id = "f_star";
  f_star.values.assign(params.n_instances, 1);

  std::vector<Interpretation> human;
  human.push_back(f_star);
  for (std::size_t r = 0; r < params.n_rules; ++r) {
    Interpretation f;
    f.interp_id = "rule_" + std::to_string(r);
    f.values = f_star.values;
    const std::size_t begin = r * params.flip_block_size;
    for (std::size_t i = begin; i < begin + params.flip_block_size; ++i) {
      f.values[i] = 0;
    }
    human.push_back(std::move(f));
  }

  std::ostringstream concept_id;
  concept_id << "synth_n" << params.n_instances << "_r" << params.n_rules << "_b"
             << params.flip_block_size << "_s" << params.seed;
  return ConceptSpec(concept_id.str(), InstanceSpace(std::move(instances)),
                     std::move(f_star), std::move(human));
}

std::vector<Interpretation> gen_llm_space(const LlmSpaceParams& params) {
  if (params.flip_probability < 0.0 || params.flip_probability > 1.0) {
    throw Error("gen_llm_space: flip_probability must be in [0, 1]");
  }
  SplitMix64 rng(params.seed);
  std::vector<Interpretation> out;
  out.reserve(params.n_interps);
  for (std::size_t k = 0; k < params.n_interps; ++k) {
    Interpretation f;
    f.interp_id = "llm_" + std::to_string(k);
    f.values.assign(params.n_instances, 1);
    for (std::size_t i = 0; i < params.n_instances; ++i) {
      if (rng.bernoulli(params.flip_probability)) f.values[i] = 0;
    }
    out.push_back(std::move(f));
  }
  return out;
}

PotemkinCount count_potemkin_interps(const ConceptSpec& spec,
                                     const KeystoneSet& keystone,
                                     const std::vector<Interpretation>& candidates) {
  if (keystone.certificate != KeystoneCertificate::declared &&
      !is_keystone(keystone.instance_indices, spec)) {
    throw Error("count_potemkin_interps: keystone set fails is_keystone");
  }
  const auto& star = spec.f_star().values;
  PotemkinCount out;
  for (const auto& f : candidates) {
    if (f.values.size() != star.size()) {
      throw DimensionMismatchError("candidate '" + f.interp_id +
                                   "' does not match the instance space");
    }
    bool agrees_on_keystone = true;
    for (std::size_t i : keystone.instance_indices) {
      if (f.values[i] != star[i]) {
        agrees_on_keystone = false;
        break;
      }
    }
    if (!agrees_on_keystone) continue;
    for (std::size_t i = 0; i < star.size(); ++i) {
      if (f.values[i] != star[i]) {
        ++out.n_potemkin;
        out.witnesses.push_back(PotemkinWitness{f.interp_id, spec.space().at(i).id});
        break;
      }
    }
  }
  return out;
}

std::vector<SweepPoint> validity_sweep(const HumanSpaceParams& human_params,
                                       const std::vector<LlmSpaceParams>& grid) {
  if (grid.empty()) throw Error("validity_sweep: grid must be non-empty");
  ConceptSpec spec = gen_human_space(human_params);
  KeystoneSet keystone = minimum_keystone(spec);
  std::vector<SweepPoint> out;
  out.reserve(grid.size());
  for (const auto& llm_params : grid) {
    if (llm_params.n_instances != human_params.n_instances) {
      throw Error("validity_sweep: grid point instance count differs from human space");
    }
    auto candidates = gen_llm_space(llm_params);
    auto count = count_potemkin_interps(spec, keystone, candidates);
    SweepPoint point;
    point.flip_probability = llm_params.flip_probability;
    point.n_interps = llm_params.n_interps;
    point.n_potemkin = count.n_potemkin;
    point.potemkin_fraction =
        llm_params.n_interps == 0
            ? 0.0
            : static_cast<double>(count.n_potemkin) /
                  static_cast<double>(llm_params.n_interps);
    out.push_back(point);
  }
  return out;
}

}  // namespace potemkin
