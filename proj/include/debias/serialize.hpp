#pragma once

#include <cereal/archives/portable_binary.hpp>
#include <cereal/types/string.hpp>
#include <cereal/types/vector.hpp>

#include <cstdint>
#include <fstream>
#include <new>
#include <stdexcept>
#include <string>
#include <vector>

#include "debias/errors.hpp"
#include "debias/model.hpp"

namespace debias {

inline constexpr const char* kModelMagic = "debias-tagger";
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

template <typename Archive, typename M>
void save_array(Archive& ar, const M& m) {
  std::vector<double> data(m.data(), m.data() + m.size());
  ar(static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols()), data);
}

template <typename Archive, typename M>
void load_array(Archive& ar, M& m, const char* name) {
  std::uint64_t rows = 0, cols = 0;
  std::vector<double> data;
  ar(rows, cols, data);
  if (static_cast<Eigen::Index>(rows) != m.rows() || static_cast<Eigen::Index>(cols) != m.cols() ||
      data.size() != rows * cols)
    throw ModelFormatError(std::string("array ") + name + " has shape " + std::to_string(rows) + "x" +
                           std::to_string(cols) + ", expected " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  std::copy(data.begin(), data.end(), m.data());
}

}  // namespace detail

// Binary container: magic, format version, symbol tables, dimensions, then
// every parameter array with its shape. Doubles are stored exactly.
inline void save_model(const Tagger& m, std::ostream& os) {
  cereal::PortableBinaryOutputArchive ar(os);
  const auto d = m.params.dims();
  ar(std::string(kModelMagic), kModelFormatVersion);
  ar(m.vocab.words(), m.gold_tags.labels(), m.proj_tags.labels());
  ar(static_cast<std::uint64_t>(d.vocab), static_cast<std::uint64_t>(d.embed), static_cast<std::uint64_t>(d.hidden),
     static_cast<std::uint64_t>(d.gold_tags), static_cast<std::uint64_t>(d.proj_tags));
  for_each_array([&](const auto& a) { detail::save_array(ar, a); }, m.params);
}

inline void save_model(const Tagger& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write model file '" + path + "'");
  save_model(m, os);
  if (!os) throw IoError("failed writing model file '" + path + "'");
}

inline Tagger load_model(std::istream& is) {
  static const char* names[] = {"E", "fwd.W", "fwd.U", "fwd.b", "bwd.W", "bwd.U", "bwd.b", "W_fwd", "W_bwd", "b", "A"};
  try {
    cereal::PortableBinaryInputArchive ar(is);
    std::string magic;
    std::uint32_t version = 0;
    ar(magic);
    if (magic != kModelMagic) throw ModelFormatError("not a tagger model file");
    ar(version);
    if (version != kModelFormatVersion)
      throw ModelFormatError("unsupported model format version " + std::to_string(version));
    std::vector<std::string> words, gold, proj;
    ar(words, gold, proj);
    std::uint64_t V = 0, e = 0, h = 0, kg = 0, kp = 0;
    ar(V, e, h, kg, kp);
    if (V != words.size() || kg != gold.size() || kp != proj.size())
      throw ModelFormatError("model dimensions disagree with its vocabulary or tagsets");
    if (!V || !e || !h || !kg || !kp) throw ModelFormatError("model dimensions must be positive");
    Tagger m{Vocabulary(std::move(words)), TagSet(std::move(gold)), TagSet(std::move(proj)),
             ModelParams::zeros({V, e, h, kg, kp})};
    std::size_t i = 0;
    for_each_array([&](auto& a) { detail::load_array(ar, a, names[i++]); }, m.params);
    return m;
  } catch (const cereal::Exception& ex) {
    throw ModelFormatError(std::string("truncated or corrupt model file: ") + ex.what());
  } catch (const std::length_error&) {
    throw ModelFormatError("corrupt model file: implausible array length");
  } catch (const std::bad_alloc&) {
    throw ModelFormatError("corrupt model file: implausible array length");
  } catch (const TagsetError& ex) {
    throw ModelFormatError(std::string("bad tagset in model file: ") + ex.what());
  } catch (const DataError& ex) {
    throw ModelFormatError(std::string("bad vocabulary in model file: ") + ex.what());
  }
}

inline Tagger load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open model file '" + path + "'");
  return load_model(is);
}

}  // namespace debias
