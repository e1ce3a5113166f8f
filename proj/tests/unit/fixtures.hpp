#pragma once

#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "coannot/domain.hpp"

namespace fixtures {

inline coannot::Annotation ann(const std::string& item, const std::string& who, int cls,
                               std::set<std::string> flags = {}, int round = 1,
                               bool mark = false) {
  static coannot::AnnotationRef next = 1;
  coannot::Annotation a;
  a.ref = next++;
  a.item_id = item;
  a.annotator_id = who;
  a.round_id = round;
  a.content.class_value = cls;
  a.content.flags = std::move(flags);
  a.content.mark_for_review = mark;
  return a;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("coannot-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<coannot::Item> make_items(int n, const std::string& prefix = "item-") {
  std::vector<coannot::Item> items;
  for (int i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "%s%05d", prefix.c_str(), i);
    items.push_back({id, "text of " + std::string(id), coannot::Json::object(), ""});
  }
  return items;
}

}  // namespace fixtures
