#include "potemkin/interpretation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "potemkin/errors.hpp"

namespace potemkin {

namespace {

void check_dimensions(const Interpretation& f, const InstanceSpace& space) {
  if (f.values.size() != space.size()) {
    std::ostringstream msg;
    msg << "interpretation '" << f.interp_id << "' has " << f.values.size()
        << " values but the instance space has " << space.size();
    throw DimensionMismatchError(msg.str());
  }
}

void check_bits(const Interpretation& f) {
  for (Bit b : f.values) {
    if (b != 0 && b != 1) {
      throw SchemaError("interpretation '" + f.interp_id +
                        "' contains a value that is not 0 or 1");
    }
  }
}

}  // namespace

InstanceSpace::InstanceSpace(std::vector<Instance> instances)
    : instances_(std::move(instances)) {
  if (instances_.empty()) {
    throw SchemaError("instance space must contain at least 1 instance");
  }
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    auto [it, inserted] = index_.emplace(instances_[i].id, i);
    if (!inserted) {
      throw SchemaError("duplicate instance id '" + instances_[i].id + "'");
    }
  }
}

std::size_t InstanceSpace::index_of(const std::string& instance_id) const {
  auto it = index_.find(instance_id);
  if (it == index_.end()) {
    throw UnknownInstanceError("unknown instance id '" + instance_id + "'");
  }
  return it->second;
}

bool InstanceSpace::contains(const std::string& instance_id) const {
  return index_.count(instance_id) != 0;
}

ConceptSpec::ConceptSpec(std::string concept_id, InstanceSpace space,
                         Interpretation f_star,
                         std::vector<Interpretation> human_space,
                         std::vector<Interpretation> llm_space)
    : concept_id_(std::move(concept_id)),
      space_(std::move(space)),
      f_star_(std::move(f_star)) {
  check_dimensions(f_star_, space_);
  check_bits(f_star_);

  bool f_star_present = false;
  std::set<std::vector<Bit>> seen;
  for (auto& f : human_space) {
    check_dimensions(f, space_);
    check_bits(f);
    if (f.values == f_star_.values) {
      f_star_present = true;
    }
    if (seen.insert(f.values).second) {
      human_space_.push_back(std::move(f));
    } else {
      ++duplicates_dropped_;
    }
  }
  if (!f_star_present) {
    throw SchemaError("human_space of concept '" + concept_id_ +
                      "' does not contain f_star");
  }
  for (auto& f : llm_space) {
    check_dimensions(f, space_);
    check_bits(f);
    llm_space_.push_back(std::move(f));
  }
}

std::vector<std::string> DisagreementSet::instance_ids(
    const InstanceSpace& space) const {
  std::vector<std::string> ids;
  ids.reserve(instance_indices.size());
  for (std::size_t i : instance_indices) ids.push_back(space.at(i).id);
  return ids;
}

Bit evaluate(const Interpretation& f, const InstanceSpace& space,
             const std::string& instance_id) {
  check_dimensions(f, space);
  return f.values[space.index_of(instance_id)];
}

DisagreementSet disagreement_set(const Interpretation& f, const ConceptSpec& spec) {
  check_dimensions(f, spec.space());
  DisagreementSet out;
  out.interp_id = f.interp_id;
  const auto& star = spec.f_star().values;
  for (std::size_t i = 0; i < star.size(); ++i) {
    if (f.values[i] != star[i]) out.instance_indices.push_back(i);
  }
  return out;
}

namespace {

std::vector<std::size_t> validated_indices(
    const std::vector<std::size_t>& candidate, const InstanceSpace& space) {
  for (std::size_t i : candidate) {
    if (i >= space.size()) {
      throw UnknownInstanceError("instance index " + std::to_string(i) +
                                 " out of range for space of size " +
                                 std::to_string(space.size()));
    }
  }
  return candidate;
}

}  // namespace

bool is_distinguishing(const std::vector<std::size_t>& candidate_indices,
                       const ConceptSpec& spec) {
  const auto candidate = validated_indices(candidate_indices, spec.space());
  const auto& star = spec.f_star().values;
  for (const auto& f : spec.human_space()) {
    if (f.values == star) continue;
    bool hit = false;
    for (std::size_t i : candidate) {
      if (f.values[i] != star[i]) {
        hit = true;
        break;
      }
    }
    if (!hit) return false;
  }
  return true;
}

bool is_distinguishing_ids(const std::vector<std::string>& candidate_ids,
                           const ConceptSpec& spec) {
  std::vector<std::size_t> indices;
  indices.reserve(candidate_ids.size());
  for (const auto& id : candidate_ids) indices.push_back(spec.space().index_of(id));
  return is_distinguishing(indices, spec);
}

bool is_keystone(const std::vector<std::size_t>& candidate_indices,
                 const ConceptSpec& spec) {
  if (!is_distinguishing(candidate_indices, spec)) return false;
  for (std::size_t drop = 0; drop < candidate_indices.size(); ++drop) {
    std::vector<std::size_t> reduced;
    reduced.reserve(candidate_indices.size() - 1);
    for (std::size_t i = 0; i < candidate_indices.size(); ++i) {
      if (i != drop) reduced.push_back(candidate_indices[i]);
    }
    if (is_distinguishing(reduced, spec)) return false;
  }
  return true;
}

bool is_keystone_ids(const std::vector<std::string>& candidate_ids,
                     const ConceptSpec& spec) {
  std::vector<std::size_t> indices;
  indices.reserve(candidate_ids.size());
  for (const auto& id : candidate_ids) indices.push_back(spec.space().index_of(id));
  return is_keystone(indices, spec);
}

// --- Concept spec document (JSON) -----------------------------------------

namespace {

using nlohmann::json;

std::vector<Bit> parse_bits(const json& arr, const std::string& path) {
  if (!arr.is_array()) throw SchemaError(path + ": expected an array of bits");
  std::vector<Bit> bits;
  bits.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& v = arr[i];
    if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1)) {
      throw SchemaError(path + "[" + std::to_string(i) + "]: bits must be 0 or 1");
    }
    bits.push_back(static_cast<Bit>(v.get<int>()));
  }
  return bits;
}

std::vector<Interpretation> parse_interp_list(const json& arr,
                                              const std::string& path) {
  if (!arr.is_array()) throw SchemaError(path + ": expected an array");
  std::vector<Interpretation> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& entry = arr[i];
    const std::string entry_path = path + "[" + std::to_string(i) + "]";
    if (!entry.is_object() || !entry.contains("id") || !entry.contains("values")) {
      throw SchemaError(entry_path + ": expected {id, values}");
    }
    Interpretation f;
    f.interp_id = entry["id"].get<std::string>();
    f.values = parse_bits(entry["values"], entry_path + ".values");
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace

ConceptSpec ConceptSpec::from_json_text(const std::string& text,
                                        const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(origin + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) throw SchemaError(origin + ": expected a JSON object");
  for (const char* field : {"instances", "f_star", "human_space"}) {
    if (!doc.contains(field)) {
      throw SchemaError(origin + ": missing required field '" +
                        std::string(field) + "'");
    }
  }
  std::vector<Instance> instances;
  const auto& inst = doc["instances"];
  if (!inst.is_array() || inst.empty()) {
    throw SchemaError("instances: expected a non-empty array");
  }
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const auto& entry = inst[i];
    const std::string path = "instances[" + std::to_string(i) + "]";
    if (!entry.is_object() || !entry.contains("id")) {
      throw SchemaError(path + ": expected {id, text}");
    }
    instances.push_back(Instance{entry["id"].get<std::string>(),
                                 entry.value("text", std::string{})});
  }

  Interpretation f_star;
  f_star.interp_id = "f_star";
  f_star.values = parse_bits(doc["f_star"], "f_star");

  auto human = parse_interp_list(doc["human_space"], "human_space");
  std::vector<Interpretation> llm;
  if (doc.contains("llm_space")) {
    llm = parse_interp_list(doc["llm_space"], "llm_space");
  }

  return ConceptSpec(doc.value("concept_id", std::string{"concept"}),
                     InstanceSpace(std::move(instances)), std::move(f_star),
                     std::move(human), std::move(llm));
}

ConceptSpec ConceptSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open concept spec file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str(), path.string());
}

std::string ConceptSpec::to_json_text() const {
  json doc;
  doc["concept_id"] = concept_id_;
  doc["instances"] = json::array();
  for (const auto& inst : space_.instances()) {
    doc["instances"].push_back({{"id", inst.id}, {"text", inst.text}});
  }
  doc["f_star"] = f_star_.values;
  auto interp_list = [](const std::vector<Interpretation>& fs) {
    json arr = json::array();
    for (const auto& f : fs) {
      arr.push_back({{"id", f.interp_id}, {"values", f.values}});
    }
    return arr;
  };
  doc["human_space"] = interp_list(human_space_);
  if (!llm_space_.empty()) doc["llm_space"] = interp_list(llm_space_);
  return doc.dump(2) + "\n";
}

}  // namespace potemkin
