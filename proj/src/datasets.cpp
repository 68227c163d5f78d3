#include "pgdcd/datasets.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "pgdcd/errors.hpp"
#include "pgdcd/rng.hpp"

namespace pgdcd {

void LabeledDataset::validate() const {
  if (images.size() != labels.size()) {
    throw std::invalid_argument("dataset: images and labels differ in length");
  }
  if (num_classes < 2) throw std::invalid_argument("dataset: need at least 2 classes");
  const std::size_t d = dim();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].dim() != d) throw std::invalid_argument("dataset: inconsistent image dims");
    if (labels[i] >= num_classes) throw std::invalid_argument("dataset: label out of range");
  }
}

namespace {

void finish(LabeledDataset& ds, std::size_t num_classes) {
  if (num_classes == 0) {
    const auto it = std::max_element(ds.labels.begin(), ds.labels.end());
    num_classes = it == ds.labels.end() ? 0 : *it + 1;
    num_classes = std::max<std::size_t>(num_classes, 2);
  }
  ds.num_classes = num_classes;
  try {
    ds.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(FormatErrc::Malformed, e.what());
  }
}

}  // namespace

void write_csv(const LabeledDataset& data, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError(FormatErrc::Io, "cannot open " + path.string() + " for writing");
  char buf[64];
  for (std::size_t i = 0; i < data.size(); ++i) {
    os << data.labels[i];
    for (double v : data.images[i].data) {
      auto res = std::to_chars(buf, buf + sizeof(buf), v);
      os << ',';
      os.write(buf, res.ptr - buf);
    }
    os << '\n';
  }
  if (!os) throw FormatError(FormatErrc::Io, "write failed for " + path.string());
}

LabeledDataset read_csv(const std::filesystem::path& path, std::size_t num_classes) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(FormatErrc::Io, "cannot open " + path.string());
  LabeledDataset ds;
  ds.name = path.stem().string();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    std::size_t label = 0;
    auto r = std::from_chars(p, end, label);
    if (r.ec != std::errc()) {
      throw FormatError(FormatErrc::Malformed, "bad label on line " + std::to_string(lineno));
    }
    p = r.ptr;
    Vec features;
    while (p < end) {
      if (*p != ',') {
        throw FormatError(FormatErrc::Malformed, "expected ',' on line " + std::to_string(lineno));
      }
      ++p;
      double v = 0.0;
      auto f = std::from_chars(p, end, v);
      if (f.ec != std::errc()) {
        throw FormatError(FormatErrc::Malformed, "bad feature on line " + std::to_string(lineno));
      }
      p = f.ptr;
      features.push_back(v);
    }
    if (features.empty()) {
      throw FormatError(FormatErrc::Malformed, "no features on line " + std::to_string(lineno));
    }
    try {
      ds.images.emplace_back(std::move(features), 0.0, 1.0);
    } catch (const std::invalid_argument& e) {
      throw FormatError(FormatErrc::Malformed, std::string(e.what()) + " on line " +
                                                   std::to_string(lineno));
    }
    ds.labels.push_back(label);
  }
  finish(ds, num_classes);
  return ds;
}

namespace {

std::uint32_t read_be32(std::istream& is, const char* what) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw FormatError(FormatErrc::Truncated, std::string("IDX header: ") + what);
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

void write_be32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  os.write(b.data(), 4);
}

// Returns the dimension extents; magic must be 0x00 0x00 0x08 <ndims>.
std::vector<std::uint32_t> read_idx_header(std::istream& is) {
  const std::uint32_t magic = read_be32(is, "magic");
  if ((magic >> 8) != 0x08) {
    throw FormatError(FormatErrc::Malformed, "IDX: only unsigned-byte payloads are supported");
  }
  const std::uint32_t ndims = magic & 0xff;
  if (ndims == 0) throw FormatError(FormatErrc::Malformed, "IDX: zero dimensions");
  std::vector<std::uint32_t> dims(ndims);
  for (auto& d : dims) d = read_be32(is, "dimension");
  return dims;
}

}  // namespace

LabeledDataset read_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::size_t num_classes) {
  std::ifstream ii(images, std::ios::binary);
  if (!ii) throw FormatError(FormatErrc::Io, "cannot open " + images.string());
  std::ifstream il(labels, std::ios::binary);
  if (!il) throw FormatError(FormatErrc::Io, "cannot open " + labels.string());

  const auto idims = read_idx_header(ii);
  const auto ldims = read_idx_header(il);
  if (idims.size() < 2) throw FormatError(FormatErrc::Malformed, "IDX images need >= 2 dims");
  if (ldims.size() != 1) throw FormatError(FormatErrc::Malformed, "IDX labels need 1 dim");
  if (idims[0] != ldims[0]) {
    throw FormatError(FormatErrc::DimMismatch, "IDX image and label counts differ");
  }
  std::size_t feat = 1;
  for (std::size_t k = 1; k < idims.size(); ++k) feat *= idims[k];

  LabeledDataset ds;
  ds.name = images.stem().string();
  std::vector<unsigned char> buf(feat);
  for (std::uint32_t i = 0; i < idims[0]; ++i) {
    if (!ii.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(feat))) {
      throw FormatError(FormatErrc::Truncated, "IDX images end early");
    }
    Vec v(feat);
    for (std::size_t k = 0; k < feat; ++k) v[k] = buf[k] / 255.0;
    ds.images.emplace_back(std::move(v), 0.0, 1.0);
    char lab = 0;
    if (!il.get(lab)) throw FormatError(FormatErrc::Truncated, "IDX labels end early");
    ds.labels.push_back(static_cast<unsigned char>(lab));
  }
  finish(ds, num_classes);
  return ds;
}

void write_idx(const LabeledDataset& data, const std::filesystem::path& images,
               const std::filesystem::path& labels) {
  std::ofstream oi(images, std::ios::binary);
  std::ofstream ol(labels, std::ios::binary);
  if (!oi || !ol) throw FormatError(FormatErrc::Io, "cannot open IDX output files");
  const auto n = static_cast<std::uint32_t>(data.size());
  write_be32(oi, 0x00000802);  // ubyte, 2 dims: count x features
  write_be32(oi, n);
  write_be32(oi, static_cast<std::uint32_t>(data.dim()));
  write_be32(ol, 0x00000801);
  write_be32(ol, n);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.images[i].data) {
      const double scaled = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
      oi.put(static_cast<char>(static_cast<unsigned char>(scaled)));
    }
    if (data.labels[i] > 255) throw FormatError(FormatErrc::Malformed, "IDX labels must fit a byte");
    ol.put(static_cast<char>(static_cast<unsigned char>(data.labels[i])));
  }
  if (!oi || !ol) throw FormatError(FormatErrc::Io, "IDX write failed");
}

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "blobs") return SyntheticKind::Blobs;
  if (name == "rings") return SyntheticKind::Rings;
  throw std::invalid_argument("unknown synthetic dataset kind: " + name);
}

LabeledDataset generate_synthetic_dataset(const SyntheticParams& params) {
  if (params.n < 1 || params.dim < 1 || params.classes < 1) {
    throw std::invalid_argument("generate_synthetic_dataset: n, dim and classes must be >= 1");
  }
  if (params.kind == SyntheticKind::Rings && params.dim < 2) {
    throw std::invalid_argument("generate_synthetic_dataset: rings need dim >= 2");
  }
  if (!(params.noise >= 0.0)) throw std::invalid_argument("generate_synthetic_dataset: bad noise");

  Rng rng(params.seed);
  LabeledDataset ds;
  ds.num_classes = std::max<std::size_t>(params.classes, 2);
  ds.name = params.kind == SyntheticKind::Blobs ? "blobs" : "rings";

  std::vector<Vec> means;
  if (params.kind == SyntheticKind::Blobs) {
    means.assign(params.classes, Vec(params.dim));
    for (auto& m : means) {
      for (double& v : m) v = rng.uniform(0.2, 0.8);
    }
  }

  for (std::size_t i = 0; i < params.n; ++i) {
    const std::size_t label = i % params.classes;
    Vec x(params.dim);
    if (params.kind == SyntheticKind::Blobs) {
      for (std::size_t k = 0; k < params.dim; ++k) x[k] = means[label][k] + rng.normal(0.0, params.noise);
    } else {
      // Radii 0.1, 0.2, ... scaled so the outermost ring stays inside [0, 1].
      const double radius = 0.45 * static_cast<double>(label + 1) / static_cast<double>(params.classes);
      const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double r = radius + rng.normal(0.0, params.noise * 0.1);
      x[0] = 0.5 + r * std::cos(theta);
      x[1] = 0.5 + r * std::sin(theta);
      for (std::size_t k = 2; k < params.dim; ++k) x[k] = 0.5 + rng.normal(0.0, params.noise);
    }
    for (double& v : x) v = std::clamp(v, 0.0, 1.0);
    ds.images.emplace_back(std::move(x), 0.0, 1.0);
    ds.labels.push_back(label);
  }
  return ds;
}

}  // namespace pgdcd
