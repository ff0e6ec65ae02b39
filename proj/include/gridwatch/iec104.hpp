#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

// IEC 60870-5-104 encoder/decoder for the type subset used by the simulated
// SCADA traffic: single points (1), scaled (11) and short-float (13)
// measurements, single commands (45) and short-float set points (50).
namespace gridwatch::iec104 {

enum class TypeId : std::uint8_t {
    M_SP_NA_1 = 1,
    M_ME_NB_1 = 11,
    M_ME_NF_1 = 13,
    C_SC_NA_1 = 45,
    C_SE_NC_1 = 50,
};

enum class Cot : std::uint8_t {
    Cyclic = 1,
    Spontaneous = 3,
    Activation = 6,
    ActivationCon = 7,
    ActivationTerm = 10,
};

enum class UFunction : std::uint8_t {
    StartDtAct = 0x04,
    StartDtCon = 0x08,
    StopDtAct = 0x10,
    StopDtCon = 0x20,
    TestFrAct = 0x40,
    TestFrCon = 0x80,
};

struct IFrame {
    std::uint16_t tx_seq = 0;  // 0..32767
    std::uint16_t rx_seq = 0;
    bool operator==(const IFrame&) const = default;
};
struct SFrame {
    std::uint16_t rx_seq = 0;
    bool operator==(const SFrame&) const = default;
};
struct UFrame {
    UFunction function = UFunction::StartDtAct;
    bool operator==(const UFrame&) const = default;
};

using ControlField = std::variant<IFrame, SFrame, UFrame>;

struct SinglePoint {
    bool on = false;
    std::uint8_t quality = 0;  // upper quality bits (IV/NT/SB/BL)
    bool operator==(const SinglePoint&) const = default;
};
struct ScaledValue {
    std::int16_t value = 0;
    std::uint8_t quality = 0;
    bool operator==(const ScaledValue&) const = default;
};
struct ShortFloat {
    float value = 0.0f;
    std::uint8_t quality = 0;
    bool operator==(const ShortFloat&) const = default;
};
struct SingleCommand {
    bool on = false;
    std::uint8_t qualifier = 0;
    bool operator==(const SingleCommand&) const = default;
};

using IoValue = std::variant<SinglePoint, ScaledValue, ShortFloat, SingleCommand>;

struct InformationObject {
    std::uint32_t ioa = 0;  // 3 octets
    IoValue value;
    bool operator==(const InformationObject&) const = default;
};

struct Asdu {
    TypeId type_id = TypeId::M_ME_NF_1;
    bool sq_flag = false;
    Cot cot = Cot::Cyclic;
    std::uint8_t origin_address = 0;
    std::uint16_t common_address = 1;
    std::vector<InformationObject> objects;
    bool operator==(const Asdu&) const = default;
};

struct Apdu {
    ControlField control;
    std::optional<Asdu> asdu;  // present only for I-frames
    bool operator==(const Apdu&) const = default;
};

class FrameTooLarge : public std::runtime_error {
public:
    FrameTooLarge() : std::runtime_error("iec104: frame exceeds 253 length octets") {}
};

enum class DecodeStatus {
    Ok,
    NeedMoreData,
    BadStartByte,
    UnsupportedTypeId,
    MalformedControl,
    Malformed,  // inconsistent lengths / bad object layout
};

const char* to_string(DecodeStatus s);

struct DecodeResult {
    DecodeStatus status = DecodeStatus::Ok;
    std::optional<Apdu> apdu;
    std::size_t consumed = 0;
    bool ok() const { return status == DecodeStatus::Ok; }
};

std::array<std::uint8_t, 4> encode_control_field(const ControlField& cf);

struct ControlDecode {
    DecodeStatus status = DecodeStatus::Ok;
    ControlField field;
};
ControlDecode decode_control_field(const std::uint8_t* octets);

// Full APDU: 0x68, length, 4 control octets, optional ASDU.
// Throws FrameTooLarge when the length octet would exceed 253.
std::vector<std::uint8_t> encode_apdu(const Apdu& apdu);

DecodeResult decode_apdu(const std::uint8_t* data, std::size_t size);
DecodeResult decode_apdu(const std::vector<std::uint8_t>& data);

// Element byte size for one information object of the given type (without IOA).
std::size_t element_size(TypeId type);

}  // namespace gridwatch::iec104
