#include "centaur/embedding_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "centaur/error.hpp"
#include "centaur/random.hpp"

namespace centaur {

static_assert(std::endian::native == std::endian::little, "store I/O assumes a little-endian host");

EmbeddingStore::EmbeddingStore(std::uint32_t dim, std::string provenance)
    : dim_(dim), provenance_(std::move(provenance)) {}

void EmbeddingStore::add(std::string trial_id, std::span<const float> values) {
    if (values.size() != dim_)
        throw FormatError("row '" + trial_id + "' has length " + std::to_string(values.size()) + ", expected " +
                          std::to_string(dim_));
    for (float v : values)
        if (!std::isfinite(v)) throw FormatError("row '" + trial_id + "' contains NaN or Inf");
    if (!index_.emplace(trial_id, ids_.size()).second) throw FormatError("duplicate trial id '" + trial_id + "'");
    ids_.push_back(std::move(trial_id));
    data_.insert(data_.end(), values.begin(), values.end());
}

std::optional<std::size_t> EmbeddingStore::find(const std::string& trial_id) const {
    auto it = index_.find(trial_id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::span<const float> EmbeddingStore::row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
}

std::span<const float> EmbeddingStore::row(const std::string& trial_id) const {
    auto i = find(trial_id);
    if (!i) throw DataError("no embedding for trial '" + trial_id + "'");
    return row(*i);
}

std::vector<std::string> EmbeddingStore::missing(std::span<const std::string> trial_ids) const {
    std::vector<std::string> out;
    for (const auto& id : trial_ids)
        if (!contains(id)) out.push_back(id);
    return out;
}

Eigen::MatrixXd EmbeddingStore::matrix(std::span<const std::string> trial_ids) const {
    const auto absent = missing(trial_ids);
    if (!absent.empty()) {
        std::string msg = "missing embeddings for " + std::to_string(absent.size()) + " trial(s):";
        for (const auto& id : absent) msg += " " + id;
        throw DataError(msg);
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(trial_ids.size()), dim_);
    for (std::size_t r = 0; r < trial_ids.size(); ++r) {
        const auto values = row(trial_ids[r]);
        for (std::uint32_t c = 0; c < dim_; ++c) x(static_cast<Eigen::Index>(r), c) = values[c];
    }
    return x;
}

bool EmbeddingStore::operator==(const EmbeddingStore& other) const {
    return dim_ == other.dim_ && provenance_ == other.provenance_ && ids_ == other.ids_ &&
           data_.size() == other.data_.size() &&
           std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

namespace {

constexpr char kMagic[4] = {'C', 'N', 'T', 'R'};

template <typename T>
void put(std::string& buf, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    buf.append(bytes, sizeof(T));
}

void put_string(std::string& buf, const std::string& s) {
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(s.size()));
    buf += s;
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    std::string get_string() {
        const auto len = get<std::uint32_t>();
        need(len);
        std::string s = bytes_.substr(pos_, len);
        pos_ += len;
        return s;
    }

    const char* take(std::size_t n) {
        need(n);
        const char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

    std::size_t position() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (n > bytes_.size() - pos_) throw IntegrityError("embedding store truncated");
    }

    const std::string& bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(const char* data, std::size_t size) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large buffers in chunks.
    constexpr std::size_t kChunk = 1u << 30;
    for (std::size_t off = 0; off < size; off += kChunk) {
        const auto n = static_cast<uInt>(std::min(kChunk, size - off));
        crc = crc32(crc, reinterpret_cast<const Bytef*>(data + off), n);
    }
    return static_cast<std::uint32_t>(crc);
}

} // namespace

std::uint64_t store_file_size(const EmbeddingStore& store) {
    std::uint64_t size = 4 + 2 + 4 + 8 + 4 + store.provenance().size();
    for (const auto& id : store.ids()) size += 4 + id.size();
    size += static_cast<std::uint64_t>(store.size()) * store.dim() * sizeof(float);
    return size + 4;
}

void write_store(const EmbeddingStore& store, const std::filesystem::path& path) {
    std::string buf;
    buf.reserve(static_cast<std::size_t>(store_file_size(store)));
    buf.append(kMagic, 4);
    put<std::uint16_t>(buf, kStoreVersion);
    put<std::uint32_t>(buf, store.dim());
    put<std::uint64_t>(buf, store.size());
    put_string(buf, store.provenance());
    for (const auto& id : store.ids()) put_string(buf, id);
    buf.append(reinterpret_cast<const char*>(store.data().data()), store.data().size() * sizeof(float));
    put<std::uint32_t>(buf, crc_of(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write embedding store " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw FormatError("short write to " + path.string());
}

EmbeddingStore read_store(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open embedding store " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw IntegrityError(path.string() + ": bad magic bytes");
    if (bytes.size() < 8) throw IntegrityError(path.string() + ": truncated");
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
    if (crc_of(bytes.data(), bytes.size() - 4) != stored_crc) throw IntegrityError(path.string() + ": CRC mismatch");

    Reader r(bytes);
    r.take(4);
    const auto version = r.get<std::uint16_t>();
    if (version != kStoreVersion) throw IntegrityError(path.string() + ": unsupported version " + std::to_string(version));
    const auto dim = r.get<std::uint32_t>();
    const auto rows = r.get<std::uint64_t>();
    EmbeddingStore store(dim, r.get_string());

    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(rows));
    for (std::uint64_t i = 0; i < rows; ++i) ids.push_back(r.get_string());
    const std::size_t payload = static_cast<std::size_t>(rows) * dim * sizeof(float);
    if (r.position() + payload + 4 != bytes.size())
        throw FormatError(path.string() + ": payload size does not match rows x dim");
    const char* data = r.take(payload);
    std::vector<float> row(dim);
    for (std::uint64_t i = 0; i < rows; ++i) {
        std::memcpy(row.data(), data + i * dim * sizeof(float), dim * sizeof(float));
        store.add(std::move(ids[static_cast<std::size_t>(i)]), row);
    }
    return store;
}

Eigen::MatrixXd FeatureScaler::transform(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd out = x;
    transform_in_place(out);
    return out;
}

void FeatureScaler::transform_in_place(Eigen::MatrixXd& x) const {
    if (x.cols() != means.size()) throw ShapeError("scaler dimension does not match matrix");
    x.rowwise() -= means.transpose();
    x.array().rowwise() /= standard_deviations.transpose().array();
}

FeatureScaler fit_scaler(const Eigen::MatrixXd& x, std::span<const std::size_t> rows) {
    if (rows.empty()) throw ConfigError("cannot fit a scaler on an empty subset");
    const Eigen::Index d = x.cols();
    const double n = static_cast<double>(rows.size());
    FeatureScaler s;
    s.means = Eigen::VectorXd::Zero(d);
    for (auto r : rows) s.means += x.row(static_cast<Eigen::Index>(r)).transpose();
    s.means /= n;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
    for (auto r : rows) var += (x.row(static_cast<Eigen::Index>(r)).transpose() - s.means).array().square().matrix();
    var /= n;
    s.standard_deviations = var.array().sqrt();
    s.constant.assign(static_cast<std::size_t>(d), false);
    for (Eigen::Index j = 0; j < d; ++j) {
        // Relative threshold: float-rounded copies of a constant are still constant.
        const double scale = std::max(1.0, std::abs(s.means(j)));
        if (!(s.standard_deviations(j) > 1e-12 * scale)) {
            s.standard_deviations(j) = 1.0;
            s.constant[static_cast<std::size_t>(j)] = true;
        }
    }
    return s;
}

FeatureScaler fit_scaler(const Eigen::MatrixXd& x) {
    std::vector<std::size_t> rows(static_cast<std::size_t>(x.rows()));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return fit_scaler(x, rows);
}

FeatureScaler fit_scaler(const EmbeddingStore& store, std::span<const std::string> trial_ids) {
    if (trial_ids.empty()) throw ConfigError("cannot fit a scaler on an empty subset");
    return fit_scaler(store.matrix(trial_ids));
}

EmbeddingStore apply_scaler(const FeatureScaler& scaler, const EmbeddingStore& store) {
    if (static_cast<std::uint32_t>(scaler.means.size()) != store.dim())
        throw ShapeError("scaler dimension does not match store");
    EmbeddingStore out(store.dim(), store.provenance());
    std::vector<float> buf(store.dim());
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto row = store.row(i);
        for (std::uint32_t j = 0; j < store.dim(); ++j)
            buf[j] = static_cast<float>((row[j] - scaler.means(j)) / scaler.standard_deviations(j));
        out.add(store.ids()[i], buf);
    }
    return out;
}

SynthResult synth_embeddings(std::span<const std::string> trial_ids, std::uint32_t dim, std::uint64_t seed,
                             const SynthGenerator& generator) {
    if (dim < 1) throw ConfigError("embedding dim must be >= 1");
    Rng rng(seed);
    SynthResult result;
    const auto* latent = std::get_if<LinearLatent>(&generator);
    if (latent && latent->weights.size() != dim) throw ConfigError("LinearLatent weights must have length dim");
    result.store = EmbeddingStore(dim, latent ? "synthetic:linear_latent" : "synthetic:gaussian_noise");
    if (latent) result.true_probabilities.emplace();

    std::vector<double> x(dim);
    std::vector<float> row(dim);
    for (const auto& id : trial_ids) {
        for (auto& v : x) v = rng.normal();
        if (latent) {
            double logit = 0.0;
            for (std::uint32_t j = 0; j < dim; ++j) logit += x[j] * latent->weights[j];
            result.true_probabilities->push_back(1.0 / (1.0 + std::exp(-logit)));
            for (std::uint32_t j = 0; j < dim; ++j) row[j] = static_cast<float>(x[j] + latent->noise_sd * rng.normal());
        } else {
            for (std::uint32_t j = 0; j < dim; ++j) row[j] = static_cast<float>(x[j]);
        }
        result.store.add(id, row);
    }
    return result;
}

} // namespace centaur
