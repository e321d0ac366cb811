#include "latentforge/vocab.hpp"

#include <sstream>

#include "latentforge/errors.hpp"

namespace latentforge {
namespace {

const std::vector<std::string> kSpecials = {"<bos>", "<eos>", "<pad>", "<mask>"};

const std::vector<std::string> kPunct = {".", "?", ":"};

const std::vector<std::string> kFunction = {
    "a",     "agree", "and",      "answer", "as",     "born",    "by",
    "city",  "created", "critics", "everyone", "famous", "home",  "ignore",
    "in",    "is",    "it",       "know",   "knows",  "lives",   "made",
    "near",  "now",   "of",       "on",     "people", "previous", "profession",
    "rules", "say",   "that",     "the",    "was",    "what",    "who",
    "work",  "works"};

const std::vector<std::string> kGiven = {
    "alden", "mira",  "tobin",  "vera",  "silas", "noor",  "jasper", "lena",
    "kato",  "ines",  "bram",   "talia", "orin",  "sada",  "felix",  "yuna",
    "marek", "dilan", "petra",  "hollis", "ezra", "nadia", "quill",  "rafa",
    "selma", "tomas", "ulla",   "viggo", "wren",  "xavi",  "yara",   "zoric",
    "abram", "bela",  "cyrus",  "dova",  "elio",  "fern",  "gavri",  "hesta",
    "ivo",   "juna",  "kiva",   "lorn",  "moss",  "nila",  "ossian", "prue"};

const std::vector<std::string> kFamily = {
    "voss",      "hale",     "merrit",    "okada",     "brandt",   "ferro",
    "quist",     "arden",    "blythe",    "crane",     "dray",     "ellson",
    "frost",     "grieve",   "holt",      "iver",      "jace",     "kline",
    "lowe",      "marsh",    "noble",     "oakes",     "pryce",    "quail",
    "roane",     "sable",    "thorn",     "unger",     "vance",    "wilde",
    "yates",     "zeller",   "ashford",   "barden",    "calver",   "dunmore",
    "eston",     "fairn",    "garrick",   "hartwell",  "ingram",   "jardine",
    "keller",    "langley",  "mercer",    "norfield",  "ostrand",  "pellman",
    "quimby",    "ransdell", "sutter",    "tillman",   "underhill", "varga",
    "wexford",   "yarrow",   "zabel",     "arkwright", "bellamy",  "corwin",
    "dashwood",  "everly",   "fogel",     "gurney",    "harlowe",  "jessop",
    "kirby",     "lowell",   "mansard",   "norcross",  "ostler",   "penhale",
    "quarles",   "ridley",   "selwyn",    "thackery",  "umber",    "verlane",
    "whitlock",  "yeardley", "zorn",      "ames",      "bixby",    "coyle",
    "dunbar",    "eldred",   "fenwick",   "gosline",   "hartley",  "isley",
    "jorund",    "kells",    "lambert",   "mordaunt",  "nyberg",   "orrick",
    "paulsen",   "quint",    "rourke",    "severin",   "tanrow",   "uffing",
    "vellore",   "wystan",   "yorath",    "zeman",     "ansel",    "birchall",
    "corliss",   "dunstan",  "eddings",   "farrow",    "godwin",   "hallett",
    "ivers",     "jonquil",  "kestane",   "loxley",    "mireau",   "norbury",
    "othwell",   "pagett",   "quennel",   "rastley",   "sorrel",   "tarwick",
    "undset",    "vayne"};

const std::vector<std::string> kProfessions = {
    "writer", "painter", "sailor", "baker",  "weaver", "hunter",
    "singer", "farmer",  "smith",  "potter", "dancer", "fisher",
    "miner",  "tailor",  "brewer", "carver", "herder", "mason"};

const std::vector<std::string> kCities = {
    "bruma",    "calden",    "dorvik", "elmsea",  "farholt", "gildern",
    "havrock",  "ivenmoor",  "jarle",  "krestin", "lomond",  "mirewell",
    "norvale",  "ostia",     "pellin", "quorra",  "rivermoor", "sundale"};

const std::vector<std::string> kCreations = {
    "saga",      "mural",   "ballad",   "engine",  "tapestry", "statue",
    "opera",     "fresco",  "sonnet",   "chronicle", "locket", "galleon",
    "pavilion",  "mosaic",  "carousel", "archive", "lantern",  "codex"};

}  // namespace

void Vocabulary::add_block(const std::vector<std::string>& words, std::vector<int>* block) {
  for (const auto& w : words) {
    if (ids_.count(w))
      throw ContractViolation("vocabulary: duplicate token '" + w + "'");
    int id = static_cast<int>(tokens_.size());
    ids_.emplace(w, id);
    tokens_.push_back(w);
    if (block) block->push_back(id);
  }
}

Vocabulary::Vocabulary() {
  add_block(kSpecials, nullptr);
  add_block(kPunct, nullptr);
  add_block(kFunction, nullptr);
  first_name_id_ = static_cast<int>(tokens_.size());
  add_block(kGiven, &given_);
  add_block(kFamily, &family_);
  add_block(kProfessions, &objects_[0]);
  add_block(kCities, &objects_[1]);
  add_block(kCreations, &objects_[2]);
}

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary v;
  return v;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw LookupError("vocabulary: id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<size_t>(id)];
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) throw LookupError("vocabulary: unknown token '" + token + "'");
  return it->second;
}

bool Vocabulary::has(const std::string& token) const { return ids_.count(token) > 0; }

std::vector<int> Vocabulary::tokenize(const std::string& text) const {
  std::vector<int> out;
  std::istringstream ss(text);
  std::string w;
  while (ss >> w) out.push_back(id(w));
  return out;
}

std::string Vocabulary::detokenize(const std::vector<int>& ids) const {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += token(ids[i]);
  }
  return out;
}

const std::vector<int>& Vocabulary::object_ids(int relation) const {
  if (relation < 0 || relation > 2) throw ContractViolation("object_ids: relation out of range");
  return objects_[relation];
}

bool Vocabulary::is_stopword(int id) const {
  if (id < 0 || id >= size()) throw LookupError("is_stopword: id out of range");
  return id < first_name_id_;
}

}  // namespace latentforge
