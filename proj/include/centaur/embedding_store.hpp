#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace centaur {

// Per-trial feature vectors (32-bit floats), keyed by trial id.
class EmbeddingStore {
public:
    EmbeddingStore() = default;
    explicit EmbeddingStore(std::uint32_t dim, std::string provenance = {});

    std::uint32_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    const std::string& provenance() const { return provenance_; }
    void set_provenance(std::string provenance) { provenance_ = std::move(provenance); }

    // Throws FormatError on a length mismatch, duplicate id or NaN/Inf.
    void add(std::string trial_id, std::span<const float> values);

    bool contains(const std::string& trial_id) const { return index_.count(trial_id) != 0; }
    std::optional<std::size_t> find(const std::string& trial_id) const;
    std::span<const float> row(std::size_t i) const;
    std::span<const float> row(const std::string& trial_id) const;
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<float>& data() const { return data_; }

    // Ids from the request that have no row here.
    std::vector<std::string> missing(std::span<const std::string> trial_ids) const;

    // Row-major double matrix for the requested ids, in request order.
    // Throws DataError listing every missing id.
    Eigen::MatrixXd matrix(std::span<const std::string> trial_ids) const;

    // Bit-exact comparison (float payloads compared by bytes).
    bool operator==(const EmbeddingStore& other) const;

private:
    std::uint32_t dim_ = 0;
    std::string provenance_;
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<float> data_;
};

// Binary layout, little-endian:
//   "CNTR" | u16 version | u32 dim | u64 rows | u32 len + provenance bytes
//   | rows x (u32 len + id bytes) | rows x dim f32 | u32 CRC32 of all prior bytes
inline constexpr std::uint16_t kStoreVersion = 1;

void write_store(const EmbeddingStore& store, const std::filesystem::path& path);
EmbeddingStore read_store(const std::filesystem::path& path);

// Exact file size write_store produces for this store.
std::uint64_t store_file_size(const EmbeddingStore& store);

// Per-dimension standardization using population variance.
struct FeatureScaler {
    Eigen::VectorXd means;
    Eigen::VectorXd standard_deviations;
    std::vector<bool> constant;  // zero-variance dimensions (deviation forced to 1)

    Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
    void transform_in_place(Eigen::MatrixXd& x) const;
};

FeatureScaler fit_scaler(const EmbeddingStore& store, std::span<const std::string> trial_ids);
// Fits on the selected rows of an already materialized matrix.
FeatureScaler fit_scaler(const Eigen::MatrixXd& x, std::span<const std::size_t> rows);
FeatureScaler fit_scaler(const Eigen::MatrixXd& x);
EmbeddingStore apply_scaler(const FeatureScaler& scaler, const EmbeddingStore& store);

struct GaussianNoise {};

// x ~ N(0, I); true p = sigmoid(x . weights); the stored embedding is
// x + noise_sd * N(0, I), so noise_sd models feature measurement error.
struct LinearLatent {
    std::vector<double> weights;
    double noise_sd = 0.0;
};

using SynthGenerator = std::variant<GaussianNoise, LinearLatent>;

struct SynthResult {
    EmbeddingStore store;
    std::optional<std::vector<double>> true_probabilities;  // LinearLatent only
};

SynthResult synth_embeddings(std::span<const std::string> trial_ids, std::uint32_t dim, std::uint64_t seed,
                             const SynthGenerator& generator);

} // namespace centaur
