#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/format.h>

#include "designbridge/backends.hpp"
#include "designbridge/catalog.hpp"
#include "designbridge/design_space.hpp"
#include "designbridge/elicitation.hpp"
#include "designbridge/rng.hpp"

namespace dbt {

using namespace designbridge;

inline const DesignSpace& space() { return DesignSpace::canonical(); }

inline DesignVector random_vector(Rng& rng) {
  DesignVector v;
  for (int d = 0; d < kDimensionCount; ++d) v.set(d, static_cast<int>(rng.index(space().attribute_count(d))));
  return v;
}

inline DesignVector vector_of(std::initializer_list<const char*> names) {
  DesignVector v;
  int d = 0;
  for (const char* n : names) {
    v.set(d, space().find_attribute(d, n).value().attribute);
    ++d;
  }
  return v;
}

inline DesignItem make_item(const std::string& id, const DesignVector& v, std::uint64_t seed = 1) {
  DesignItem item;
  item.item_id = id;
  item.design_vector = v;
  item.colors = {v[kSpecificColors]};
  item.image_ref = "img-" + id;
  item.image_width = 768;
  item.image_height = 768;
  item.visual_embedding = MockEmbeddingBackend(seed).embed(v, item.image_ref);
  return item;
}

inline BrushRegion full_region(int w = 768, int h = 768) { return {0, 0, w, h, w, h}; }

inline InteractionRecord brush(const std::string& rec, const std::string& user, const std::string& item, Polarity p,
                               std::vector<int> dims, BrushRegion region = full_region()) {
  InteractionRecord r;
  r.record_id = rec;
  r.user_id = user;
  r.session_id = "s-" + user;
  r.item_id = item;
  r.kind = InteractionKind::Brush;
  r.polarity = p;
  r.region = region;
  r.confirmed_dimensions = std::move(dims);
  return r;
}

inline InteractionRecord vote(const std::string& rec, const std::string& user, const std::string& item, Polarity p) {
  InteractionRecord r;
  r.record_id = rec;
  r.user_id = user;
  r.session_id = "s-" + user;
  r.item_id = item;
  r.kind = InteractionKind::OverallVote;
  r.polarity = p;
  return r;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            fmt::format("designbridge-{}-{}-{}", tag, static_cast<long>(::getpid()), counter++);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace dbt
