#include "dynsdf/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

namespace dynsdf {

namespace {

constexpr std::array<char, 8> kMagic = {'D', 'Y', 'N', 'S', 'D', 'F', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <typename T>
  void put(T v) {
    static_assert(std::endian::native == std::endian::little);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put(const Vec3& v) {
    for (int a = 0; a < 3; ++a) put(v[a]);
  }
  void put_array(const double* data, std::size_t n) {
    out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, const std::filesystem::path& path) : in_(in), path_(path) {}
  template <typename T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    check();
    return v;
  }
  Vec3 get_vec3() {
    Vec3 v;
    for (int a = 0; a < 3; ++a) v[a] = get<double>();
    return v;
  }
  void get_array(double* data, std::size_t n) {
    in_.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
    check();
  }

 private:
  void check() {
    if (!in_) throw FormatError("truncated checkpoint (" + path_.string() + ")");
  }
  std::ifstream& in_;
  std::filesystem::path path_;
};

}  // namespace

void save_checkpoint(const NeuralField& field, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open checkpoint for writing (" + path.string() + ")");
  Writer w(out);
  const auto& cfg = field.config();
  const auto& octree = field.octree();
  out.write(kMagic.data(), kMagic.size());
  w.put(kVersion);

  // Construction parameters.
  w.put(octree.anchor());
  w.put(cfg.octree.leaf_size);
  w.put(static_cast<std::int32_t>(cfg.octree.max_depth));
  w.put(static_cast<std::int32_t>(cfg.octree.feature_levels));
  w.put(static_cast<std::int32_t>(cfg.octree.feature_dim));
  w.put(cfg.octree.init_scale);
  w.put(cfg.octree.seed);
  w.put(static_cast<std::uint8_t>(cfg.use_fourier));
  w.put(static_cast<std::int32_t>(cfg.fourier_k));
  w.put(cfg.sigma2);
  w.put(cfg.encoding_scale);
  w.put(static_cast<std::int32_t>(cfg.hidden.size()));
  for (int h : cfg.hidden) w.put(static_cast<std::int32_t>(h));
  w.put(cfg.softplus_beta);
  w.put(cfg.seed);

  // Current root.
  w.put(octree.origin());
  w.put(octree.root_size());
  w.put(static_cast<std::int32_t>(octree.max_depth()));

  const auto leaves = octree.leaf_keys();
  w.put(static_cast<std::uint64_t>(leaves.size()));
  for (const auto& k : leaves) {
    for (int a = 0; a < 3; ++a) w.put(k[a]);
  }
  for (int level = 0; level < octree.feature_levels(); ++level) {
    const auto& keys = octree.vertex_keys(level);
    w.put(static_cast<std::uint64_t>(keys.size()));
    const auto& table = octree.embeddings(level);
    const auto F = static_cast<std::size_t>(octree.feature_dim());
    for (std::size_t i = 0; i < keys.size(); ++i) {
      for (int a = 0; a < 3; ++a) w.put(keys[i][a]);
      w.put_array(table.data() + i * F, F);
    }
  }

  const auto& B = field.encoder().B();
  w.put(static_cast<std::int32_t>(B.rows()));
  for (Eigen::Index i = 0; i < B.rows(); ++i) {
    for (int a = 0; a < 3; ++a) w.put(B(i, a));
  }
  const auto params = field.decoder().params();
  w.put(static_cast<std::uint64_t>(params.size()));
  w.put_array(params.data(), params.size());

  out.flush();
  if (!out) throw Error("failed writing checkpoint (" + path.string() + ")");
}

NeuralField load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint (" + path.string() + ")");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw FormatError("not a checkpoint file (" + path.string() + ")");
  Reader r(in, path);
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }

  FieldConfig cfg;
  cfg.octree.origin = r.get_vec3();
  cfg.octree.leaf_size = r.get<double>();
  cfg.octree.max_depth = r.get<std::int32_t>();
  cfg.octree.feature_levels = r.get<std::int32_t>();
  cfg.octree.feature_dim = r.get<std::int32_t>();
  cfg.octree.init_scale = r.get<double>();
  cfg.octree.seed = r.get<std::uint64_t>();
  cfg.use_fourier = r.get<std::uint8_t>() != 0;
  cfg.fourier_k = r.get<std::int32_t>();
  cfg.sigma2 = r.get<double>();
  cfg.encoding_scale = r.get<double>();
  const auto n_hidden = r.get<std::int32_t>();
  if (n_hidden < 0 || n_hidden > 64) throw FormatError("corrupt checkpoint header");
  cfg.hidden.resize(static_cast<std::size_t>(n_hidden));
  for (auto& h : cfg.hidden) h = r.get<std::int32_t>();
  cfg.softplus_beta = r.get<double>();
  cfg.seed = r.get<std::uint64_t>();

  NeuralField field(cfg);
  const Vec3 origin = r.get_vec3();
  const double root_size = r.get<double>();
  const int max_depth = r.get<std::int32_t>();

  std::vector<GridKey> leaves(r.get<std::uint64_t>());
  for (auto& k : leaves) {
    for (int a = 0; a < 3; ++a) k[a] = r.get<std::int64_t>();
  }
  const auto levels = static_cast<std::size_t>(cfg.octree.feature_levels);
  const auto F = static_cast<std::size_t>(cfg.octree.feature_dim);
  std::vector<std::vector<GridKey>> keys(levels);
  std::vector<std::vector<double>> tables(levels);
  for (std::size_t level = 0; level < levels; ++level) {
    const auto n = r.get<std::uint64_t>();
    keys[level].resize(n);
    tables[level].resize(n * F);
    for (std::size_t i = 0; i < n; ++i) {
      for (int a = 0; a < 3; ++a) keys[level][i][a] = r.get<std::int64_t>();
      r.get_array(tables[level].data() + i * F, F);
    }
  }
  field.octree().restore(origin, root_size, max_depth, leaves, keys, tables);

  FourierEncoder::Matrix B(r.get<std::int32_t>(), 3);
  for (Eigen::Index i = 0; i < B.rows(); ++i) {
    for (int a = 0; a < 3; ++a) B(i, a) = r.get<double>();
  }
  if (B.rows() != field.encoder().k()) throw FormatError("checkpoint encoder size mismatch");
  field.set_encoder(FourierEncoder(B, cfg.sigma2));
  const auto n_params = r.get<std::uint64_t>();
  if (n_params != field.decoder().num_params()) throw FormatError("checkpoint decoder size mismatch");
  r.get_array(field.decoder().params().data(), n_params);
  return field;
}

}  // namespace dynsdf
