#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace latentforge {

// Word-level closed vocabulary. Ids are dense in [0, size). The token list
// is fixed (not seed-dependent) and organized in contiguous blocks:
// specials, punctuation, function words, given names, family names, then
// one object block per relation.
class Vocabulary {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kPad = 2;
  static constexpr int kMask = 3;

  static const Vocabulary& standard();  // canonical shared instance

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const;
  int id(const std::string& token) const;  // LookupError when absent
  bool has(const std::string& token) const;

  std::vector<int> tokenize(const std::string& text) const;  // whitespace split
  std::string detokenize(const std::vector<int>& ids) const;

  // Category blocks.
  const std::vector<int>& given_ids() const { return given_; }
  const std::vector<int>& family_ids() const { return family_; }
  const std::vector<int>& object_ids(int relation) const;  // 0..2
  // Specials, punctuation and function words: everything that is not a
  // name or a fact object.
  bool is_stopword(int id) const;

 private:
  Vocabulary();
  void add_block(const std::vector<std::string>& words, std::vector<int>* block);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  std::vector<int> given_, family_;
  std::vector<int> objects_[3];
  int first_name_id_ = 0;  // ids below this are stopwords
};

}  // namespace latentforge
