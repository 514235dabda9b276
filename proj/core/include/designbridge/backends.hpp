#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "designbridge/design_space.hpp"

namespace designbridge {

using VisualEmbedding = std::array<double, kVisualSize>;

/// Content-addressed blob storage. Blob ids are the SHA-256 of the bytes;
/// with a root directory each blob lives at <root>/<id>.png.
class BlobStore {
 public:
  /// In-memory store.
  BlobStore() = default;
  explicit BlobStore(std::filesystem::path root);

  std::string put(std::span<const std::uint8_t> bytes);
  std::optional<std::vector<std::uint8_t>> get(const std::string& id) const;
  bool contains(const std::string& id) const;
  std::size_t size() const;
  const std::optional<std::filesystem::path>& root() const { return root_; }

 private:
  std::optional<std::filesystem::path> root_;
  mutable std::mutex mutex_;
  std::map<std::string, std::vector<std::uint8_t>> memory_;
};

struct GenerationRequest {
  std::string prompt;
  DesignVector design;
  /// Fine-tune manifests (adapter references) the generator should apply.
  std::vector<std::string> adapters;
  /// Distinguishes several images for the same prompt.
  int variant = 0;
};

struct GeneratedImage {
  std::string blob_id;
  int width = 0;
  int height = 0;
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  /// Throws BackendUnavailable when the generator cannot be reached.
  virtual GeneratedImage generate(const GenerationRequest& request) = 0;
  /// Scene image for the try-on background.
  virtual GeneratedImage generate_scene(const std::string& prompt) = 0;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual VisualEmbedding embed(const DesignVector& design, const std::string& image_ref) = 0;
};

/// Writes single-color placeholder PNGs whose color follows the design's
/// specific color, shaded by a hash of the request.
class MockGenerationBackend final : public GenerationBackend {
 public:
  MockGenerationBackend(const DesignSpace& space, BlobStore& blobs, std::uint64_t seed)
      : space_(&space), blobs_(&blobs), seed_(seed) {}
  GeneratedImage generate(const GenerationRequest& request) override;
  GeneratedImage generate_scene(const std::string& prompt) override;

 private:
  const DesignSpace* space_;
  BlobStore* blobs_;
  std::uint64_t seed_;
};

/// Seeded pseudo-random 50-vector in [-1, 1] keyed on (design, image_ref).
class MockEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit MockEmbeddingBackend(std::uint64_t seed) : seed_(seed) {}
  VisualEmbedding embed(const DesignVector& design, const std::string& image_ref) override;

 private:
  std::uint64_t seed_;
};

/// Stands in for an external service with no endpoint configured.
class UnavailableGenerationBackend final : public GenerationBackend {
 public:
  GeneratedImage generate(const GenerationRequest& request) override;
  GeneratedImage generate_scene(const std::string& prompt) override;
};

class UnavailableEmbeddingBackend final : public EmbeddingBackend {
 public:
  VisualEmbedding embed(const DesignVector& design, const std::string& image_ref) override;
};

}  // namespace designbridge
