#include <cstring>
#include <fstream>
#include <sstream>

#include "heom/fingerprint.hpp"
#include "heom/hierarchy.hpp"

namespace heom {

namespace {

constexpr char kMagic[8] = {'H', 'E', 'O', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kEndianMark = 0x01020304;

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw InvalidArgument("checkpoint is truncated");
  return v;
}

void add_matrix(Fingerprint& f, const Matrix& m) {
  f.add(static_cast<std::int64_t>(m.rows())).add(static_cast<std::int64_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) f.add(m(i, j));
}

}  // namespace

std::uint64_t fingerprint(const SystemModel& model) {
  Fingerprint f;
  f.add(std::string_view("system"));
  add_matrix(f, model.h_static());
  f.add(static_cast<std::int64_t>(model.num_baths()));
  for (const auto& v : model.couplings()) add_matrix(f, v);
  if (model.drive()) {
    f.add(model.drive()->amplitude).add(model.drive()->frequency);
    add_matrix(f, model.drive()->pattern);
  }
  return f.value();
}

std::uint64_t fingerprint(std::span<const NoiseDecomposition> baths) {
  Fingerprint f;
  f.add(std::string_view("baths"));
  f.add(static_cast<std::int64_t>(baths.size()));
  for (const auto& b : baths) {
    f.add(static_cast<std::int64_t>(b.size()));
    for (const auto& t : b.terms()) f.add(t.c_real).add(t.c_imag).add(t.rate);
    f.add(b.delta_weight());
  }
  return f.value();
}

void save_checkpoint(const std::filesystem::path& path, const Hierarchy& h,
                     const HierarchyState& state) {
  const AdoTable& tab = h.table();
  if (state.num_ados() != tab.size() || state.dim() != h.model().dim())
    throw InvalidArgument("state does not belong to this hierarchy");
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open checkpoint for writing: " + tmp);
    os.write(kMagic, sizeof kMagic);
    put(os, kVersion);
    put(os, kEndianMark);
    put(os, fingerprint(h.model()));
    put(os, fingerprint(std::span<const NoiseDecomposition>(h.baths())));
    put(os, static_cast<std::int32_t>(tab.depth()));
    put(os, state.time());
    put(os, static_cast<std::uint32_t>(state.dim()));
    put(os, static_cast<std::uint32_t>(tab.num_baths()));
    for (std::size_t k = 0; k < tab.num_baths(); ++k) {
      put(os, static_cast<std::int32_t>(tab.modes_per_bath()[k]));
      put(os, static_cast<std::int32_t>(tab.bath_depth_caps()[k]));
    }
    put(os, static_cast<std::uint64_t>(tab.size()));
    const auto data = state.data();
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(cplx)));
    if (!os) throw Error("failed writing checkpoint: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

HierarchyState load_checkpoint(const std::filesystem::path& path, const Hierarchy& h) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot open checkpoint: " + path.string());
  char magic[sizeof kMagic];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw InvalidArgument("not a checkpoint file: " + path.string());
  if (get<std::uint32_t>(is) != kVersion) throw InvalidArgument("unsupported checkpoint version");
  if (get<std::uint32_t>(is) != kEndianMark)
    throw InvalidArgument("checkpoint was written with a different byte order");
  if (get<std::uint64_t>(is) != fingerprint(h.model()))
    throw InvalidArgument("checkpoint model fingerprint does not match");
  if (get<std::uint64_t>(is) != fingerprint(std::span<const NoiseDecomposition>(h.baths())))
    throw InvalidArgument("checkpoint bath decomposition fingerprint does not match");

  const AdoTable& tab = h.table();
  const auto depth = get<std::int32_t>(is);
  const auto t = get<double>(is);
  const auto dim = get<std::uint32_t>(is);
  const auto nb = get<std::uint32_t>(is);
  bool same = depth == tab.depth() && static_cast<int>(dim) == h.model().dim() &&
              nb == tab.num_baths();
  for (std::uint32_t k = 0; k < nb; ++k) {
    const auto modes = get<std::int32_t>(is);
    const auto cap = get<std::int32_t>(is);
    same = same && k < tab.num_baths() && modes == tab.modes_per_bath()[k] &&
           cap == tab.bath_depth_caps()[k];
  }
  same = same && get<std::uint64_t>(is) == tab.size();
  if (!same) throw InvalidArgument("checkpoint hierarchy layout does not match");

  HierarchyState state(h.table_ptr(), static_cast<int>(dim), t);
  auto data = state.data();
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(cplx)));
  if (!is) throw InvalidArgument("checkpoint is truncated");
  return state;
}

}  // namespace heom
