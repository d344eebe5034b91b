#pragma once

// Navigation byte-accounting model.
//
// Footprint figures are computed under this model rather than from raw file
// sizes so that the two event layouts are compared on the costs an object
// database would charge: a fixed header per persistent object plus field
// widths. All constants are recorded in the store MANIFEST.

#include <cstdint>
#include <cstddef>

namespace evstore {

struct ModelConstants {
  std::uint64_t object_header = 16;
  std::uint64_t oref = 8;
  std::uint64_t u32 = 4;
  std::uint64_t u64 = 8;
  std::uint64_t string_prefix = 4;

  friend bool operator==(const ModelConstants&, const ModelConstants&) = default;
};

namespace byte_model {

inline std::uint64_t string_field(const ModelConstants& m, std::size_t len) { return m.string_prefix + len; }

/// header + dynamic fragment (2 x u64) + common ref + data refs + tag ref.
inline std::uint64_t event_v2(const ModelConstants& m, std::size_t components) {
  return m.object_header + 2 * m.u64 + m.oref + components * m.oref + m.oref;
}

/// header + u32 header count + header refs + id ref + tag ref.
inline std::uint64_t event_v1(const ModelConstants& m, std::size_t components) {
  return m.object_header + m.u32 + components * m.oref + m.oref + m.oref;
}

inline std::uint64_t header(const ModelConstants& m, std::size_t key_len, std::size_t type_len) {
  return m.object_header + string_field(m, key_len) + string_field(m, type_len) + m.oref;
}

inline std::uint64_t id_object(const ModelConstants& m, std::size_t label_len) {
  return m.object_header + string_field(m, label_len) + 2 * m.u32 + 2 * m.u64;
}

inline std::uint64_t tag(const ModelConstants& m, std::size_t n_bool, std::size_t n_int, std::size_t n_float) {
  return m.object_header + m.u64 + (n_bool + 7) / 8 + 4 * n_int + 4 * n_float;
}

inline std::uint64_t common(const ModelConstants& m, std::size_t label_len, std::size_t layout_len) {
  return m.object_header + m.u64 + string_field(m, label_len) + 2 * m.u32 + string_field(m, layout_len);
}

inline std::uint64_t descriptor(const ModelConstants& m, std::size_t canonical_len) {
  return m.object_header + m.u64 + string_field(m, canonical_len);
}

}  // namespace byte_model
}  // namespace evstore
