#pragma once

#include <stdexcept>
#include <string>

namespace d2d {

/// Base for all hard contract violations (bad arguments, malformed input,
/// broken scheduling discipline). Protocol-level rejections are values, not
/// exceptions; see roles.hpp.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// crypto
struct OversizedPlaintext : Error { using Error::Error; };
struct MalformedCiphertext : Error { using Error::Error; };

// tesla
struct InvalidLength : Error { using Error::Error; };
struct IntervalOutOfRange : Error { using Error::Error; };
struct ChainExhausted : Error { using Error::Error; };
struct DisclosureTooEarly : Error { using Error::Error; };

// wire
struct FieldOverflow : Error { using Error::Error; };
struct TruncatedPacket : Error { using Error::Error; };

// roles
struct NoSessionKey : Error { using Error::Error; };

// netsim
struct ConfigInvalid : Error { using Error::Error; };
struct NoCoverage : Error { using Error::Error; };

}  // namespace d2d
