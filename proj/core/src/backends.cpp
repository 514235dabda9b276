#include "designbridge/backends.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "designbridge/error.hpp"
#include "designbridge/hash.hpp"
#include "designbridge/png.hpp"
#include "designbridge/rng.hpp"

namespace designbridge {

BlobStore::BlobStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(*root_);
}

std::string BlobStore::put(std::span<const std::uint8_t> bytes) {
  std::string id = sha256_hex(bytes);
  std::lock_guard lock(mutex_);
  if (root_) {
    const auto path = *root_ / (id + ".png");
    if (!std::filesystem::exists(path)) {
      const auto tmp = *root_ / (id + ".tmp");
      {
        std::ofstream out(tmp, std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorCode::StorageFull, "cannot write blob " + id);
      }
      std::filesystem::rename(tmp, path);
    }
  } else {
    memory_.try_emplace(id, bytes.begin(), bytes.end());
  }
  return id;
}

std::optional<std::vector<std::uint8_t>> BlobStore::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  if (root_) {
    std::ifstream in(*root_ / (id + ".png"), std::ios::binary);
    if (!in) return std::nullopt;
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
  }
  auto it = memory_.find(id);
  if (it == memory_.end()) return std::nullopt;
  return it->second;
}

bool BlobStore::contains(const std::string& id) const {
  std::lock_guard lock(mutex_);
  if (root_) return std::filesystem::exists(*root_ / (id + ".png"));
  return memory_.count(id) > 0;
}

std::size_t BlobStore::size() const {
  std::lock_guard lock(mutex_);
  if (root_) {
    std::size_t n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(*root_)) n += entry.path().extension() == ".png";
    return n;
  }
  return memory_.size();
}

namespace {

png::Rgb shade(png::Rgb base, std::uint64_t h) {
  png::Rgb out{};
  for (std::size_t c = 0; c < 3; ++c) {
    const int jitter = static_cast<int>((h >> (8 * c)) & 0x1F) - 16;
    out[c] = static_cast<std::uint8_t>(std::clamp(static_cast<int>(base[c]) + jitter, 0, 255));
  }
  return out;
}

std::string request_key(const GenerationRequest& r) {
  std::string key = r.prompt;
  for (int c : r.design.choices()) key += fmt::format("|{}", c);
  for (const auto& a : r.adapters) key += "|" + a;
  key += fmt::format("|v{}", r.variant);
  return key;
}

}  // namespace

GeneratedImage MockGenerationBackend::generate(const GenerationRequest& request) {
  const int w = space_->image_width(), h = space_->image_height();
  const auto& color_attr =
      space_->dimension(kSpecificColors).attributes[static_cast<std::size_t>(request.design[kSpecificColors])];
  const png::Rgb base = color_attr.rgb.value_or(png::Rgb{128, 128, 128});
  const auto bytes = png::encode_solid(w, h, shade(base, derive_seed(seed_, request_key(request))));
  return {blobs_->put(bytes), w, h};
}

GeneratedImage MockGenerationBackend::generate_scene(const std::string& prompt) {
  constexpr int w = 384, h = 256;
  const auto bytes = png::encode_solid(w, h, shade({150, 170, 190}, derive_seed(seed_, "scene|" + prompt)));
  return {blobs_->put(bytes), w, h};
}

VisualEmbedding MockEmbeddingBackend::embed(const DesignVector& design, const std::string& image_ref) {
  std::string key = image_ref;
  for (int c : design.choices()) key += fmt::format("|{}", c);
  Rng rng(derive_seed(seed_, key));
  VisualEmbedding out{};
  for (auto& x : out) x = rng.uniform(-1.0, 1.0);
  return out;
}

GeneratedImage UnavailableGenerationBackend::generate(const GenerationRequest&) {
  throw Error(ErrorCode::BackendUnavailable, "image generation service is not configured");
}

GeneratedImage UnavailableGenerationBackend::generate_scene(const std::string&) {
  throw Error(ErrorCode::BackendUnavailable, "image generation service is not configured");
}

VisualEmbedding UnavailableEmbeddingBackend::embed(const DesignVector&, const std::string&) {
  throw Error(ErrorCode::BackendUnavailable, "embedding service is not configured");
}

}  // namespace designbridge
