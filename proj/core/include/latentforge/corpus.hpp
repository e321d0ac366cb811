#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latentforge/rng.hpp"
#include "latentforge/vocab.hpp"

namespace latentforge {

// Relations a fact can express; each renders through its own templates.
enum class Relation : int { kProfession = 0, kCity = 1, kCreation = 2 };

struct Fact {
  Relation relation;
  int object;                 // token id from the relation's object pool
  int template_idx;           // which of the 3 training templates rendered it
  std::vector<int> sentence;  // rendered tokens, no BOS/EOS
};

struct Entity {
  int given;   // token id
  int family;  // token id, unique per entity across the whole world
  std::vector<Fact> facts;  // empty for unknown entities
};

// The synthetic ground truth. Known entities have facts and appear in the
// training sentences; unknown entities are names only and their family
// token never occurs in any sentence.
struct World {
  uint64_t seed = 0;
  int n_known = 0, n_unknown = 0, facts_per_entity = 0;
  std::vector<Entity> known;
  std::vector<Entity> unknown;
  std::vector<std::vector<int>> filler_train;    // entity-free sentences in D
  std::vector<std::vector<int>> filler_heldout;  // entity-free, not in D

  const Vocabulary& vocab() const { return Vocabulary::standard(); }
  std::vector<int> name(const Entity& e) const { return {e.given, e.family}; }
  // "given family" string or a decimal index into known.
  int find_known(const std::string& selector) const;
};

World generate_world(uint64_t seed, int n_known, int n_unknown, int facts_per_entity,
                     int n_fillers = 120, int n_heldout = 24);

struct Sequence {
  std::vector<int> tokens;                  // always ends with EOS
  std::vector<std::vector<int>> entities;   // cached extractor output
};

struct Dataset {
  std::vector<Sequence> seqs;
  bool empty() const { return seqs.empty(); }
  size_t size() const { return seqs.size(); }
};

// Fact sentences in entity order, then training fillers.
Dataset build_dataset(const World& world);

// Every world entity (known and unknown) whose full 2-token name span
// occurs in x, in world order. The exact substitute for a learned NER step.
std::vector<std::vector<int>> extract_entities(const std::vector<int>& x, const World& world);

// Subsequence of `dataset` whose cached entities contain the target's name,
// original order preserved.
Dataset build_forget_set(const Dataset& dataset, const World& world, int target_idx);

// Replaces every occurrence of `target` in x by one unknown name drawn
// uniformly from `pool` (a single draw covers all occurrences). Returns x
// unchanged, and consumes no randomness, when the target is absent.
std::vector<int> substitute_entity(const std::vector<int>& x, const std::vector<int>& target,
                                   const std::vector<std::vector<int>>& pool, Rng& rng);

struct Probe {
  enum class Kind { kFB, kQA, kAA };
  Kind kind;
  std::vector<int> prompt;  // no BOS; scoring prepends it
  std::vector<int> truth;   // contiguous answer span
  int entity;               // index into world.known
};

struct ProbeSet {
  std::vector<Probe> forget;  // FB block, then QA block, then AA block
  std::vector<Probe> retain;  // per non-target entity: FB block then QA block
};

// Forget probes cover every fact of the target in FB, QA and AA forms;
// retain probes cover every fact of every other known entity in FB and QA.
ProbeSet build_probes(const World& world, int target_idx);

// Line-oriented serialization, deterministic field order.
std::string serialize_world(const World& world);
World parse_world(const std::string& text);
std::string serialize_dataset(const Dataset& dataset, uint64_t seed);
Dataset parse_dataset(const std::string& text);

void save_text_file(const std::string& path, const std::string& text);
std::string load_text_file(const std::string& path);

}  // namespace latentforge
