#include "gridwatch/iec104.hpp"

#include <array>
#include <cstring>

namespace gridwatch::iec104 {

namespace {

bool known_type(std::uint8_t t) {
    switch (t) {
        case 1: case 11: case 13: case 45: case 50: return true;
        default: return false;
    }
}

void put_u16le(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_ioa(std::vector<std::uint8_t>& out, std::uint32_t ioa) {
    out.push_back(static_cast<std::uint8_t>(ioa & 0xFF));
    out.push_back(static_cast<std::uint8_t>((ioa >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((ioa >> 16) & 0xFF));
}

void put_element(std::vector<std::uint8_t>& out, TypeId type, const IoValue& value) {
    switch (type) {
        case TypeId::M_SP_NA_1: {
            const auto& sp = std::get<SinglePoint>(value);
            out.push_back(static_cast<std::uint8_t>((sp.quality & 0xF0) | (sp.on ? 0x01 : 0x00)));
            break;
        }
        case TypeId::M_ME_NB_1: {
            const auto& sv = std::get<ScaledValue>(value);
            put_u16le(out, static_cast<std::uint16_t>(sv.value));
            out.push_back(sv.quality);
            break;
        }
        case TypeId::M_ME_NF_1: {
            const auto& sf = std::get<ShortFloat>(value);
            std::uint32_t bits;
            std::memcpy(&bits, &sf.value, 4);
            out.push_back(static_cast<std::uint8_t>(bits & 0xFF));
            out.push_back(static_cast<std::uint8_t>((bits >> 8) & 0xFF));
            out.push_back(static_cast<std::uint8_t>((bits >> 16) & 0xFF));
            out.push_back(static_cast<std::uint8_t>((bits >> 24) & 0xFF));
            out.push_back(sf.quality);
            break;
        }
        case TypeId::C_SC_NA_1: {
            const auto& sc = std::get<SingleCommand>(value);
            out.push_back(static_cast<std::uint8_t>((sc.qualifier & 0xFC) | (sc.on ? 0x01 : 0x00)));
            break;
        }
        case TypeId::C_SE_NC_1: {
            const auto& sf = std::get<ShortFloat>(value);
            std::uint32_t bits;
            std::memcpy(&bits, &sf.value, 4);
            out.push_back(static_cast<std::uint8_t>(bits & 0xFF));
            out.push_back(static_cast<std::uint8_t>((bits >> 8) & 0xFF));
            out.push_back(static_cast<std::uint8_t>((bits >> 16) & 0xFF));
            out.push_back(static_cast<std::uint8_t>((bits >> 24) & 0xFF));
            out.push_back(sf.quality);
            break;
        }
    }
}

struct Reader {
    const std::uint8_t* p;
    std::size_t n;
    std::size_t pos = 0;
    bool need(std::size_t k) const { return pos + k <= n; }
    std::uint8_t u8() { return p[pos++]; }
    std::uint16_t u16le() {
        const std::uint16_t v = static_cast<std::uint16_t>(p[pos] | (p[pos + 1] << 8));
        pos += 2;
        return v;
    }
    std::uint32_t u24le() {
        const std::uint32_t v = static_cast<std::uint32_t>(p[pos]) |
                                (static_cast<std::uint32_t>(p[pos + 1]) << 8) |
                                (static_cast<std::uint32_t>(p[pos + 2]) << 16);
        pos += 3;
        return v;
    }
};

std::optional<IoValue> read_element(Reader& r, TypeId type) {
    switch (type) {
        case TypeId::M_SP_NA_1: {
            if (!r.need(1)) return std::nullopt;
            const std::uint8_t b = r.u8();
            return SinglePoint{(b & 0x01) != 0, static_cast<std::uint8_t>(b & 0xF0)};
        }
        case TypeId::M_ME_NB_1: {
            if (!r.need(3)) return std::nullopt;
            const auto raw = r.u16le();
            return ScaledValue{static_cast<std::int16_t>(raw), r.u8()};
        }
        case TypeId::M_ME_NF_1:
        case TypeId::C_SE_NC_1: {
            if (!r.need(5)) return std::nullopt;
            std::uint32_t bits = r.u24le();
            bits |= static_cast<std::uint32_t>(r.u8()) << 24;
            float f;
            std::memcpy(&f, &bits, 4);
            return ShortFloat{f, r.u8()};
        }
        case TypeId::C_SC_NA_1: {
            if (!r.need(1)) return std::nullopt;
            const std::uint8_t b = r.u8();
            return SingleCommand{(b & 0x01) != 0, static_cast<std::uint8_t>(b & 0xFC)};
        }
    }
    return std::nullopt;
}

}  // namespace

const char* to_string(DecodeStatus s) {
    switch (s) {
        case DecodeStatus::Ok: return "ok";
        case DecodeStatus::NeedMoreData: return "need more data";
        case DecodeStatus::BadStartByte: return "bad start byte";
        case DecodeStatus::UnsupportedTypeId: return "unsupported type id";
        case DecodeStatus::MalformedControl: return "malformed control field";
        case DecodeStatus::Malformed: return "malformed frame";
    }
    return "unknown";
}

std::size_t element_size(TypeId type) {
    switch (type) {
        case TypeId::M_SP_NA_1: return 1;
        case TypeId::M_ME_NB_1: return 3;
        case TypeId::M_ME_NF_1: return 5;
        case TypeId::C_SC_NA_1: return 1;
        case TypeId::C_SE_NC_1: return 5;
    }
    return 0;
}

std::array<std::uint8_t, 4> encode_control_field(const ControlField& cf) {
    std::array<std::uint8_t, 4> o{0, 0, 0, 0};
    if (const auto* i = std::get_if<IFrame>(&cf)) {
        o[0] = static_cast<std::uint8_t>((i->tx_seq << 1) & 0xFF);
        o[1] = static_cast<std::uint8_t>(i->tx_seq >> 7);
        o[2] = static_cast<std::uint8_t>((i->rx_seq << 1) & 0xFF);
        o[3] = static_cast<std::uint8_t>(i->rx_seq >> 7);
    } else if (const auto* s = std::get_if<SFrame>(&cf)) {
        o[0] = 0x01;
        o[2] = static_cast<std::uint8_t>((s->rx_seq << 1) & 0xFF);
        o[3] = static_cast<std::uint8_t>(s->rx_seq >> 7);
    } else {
        const auto& u = std::get<UFrame>(cf);
        o[0] = static_cast<std::uint8_t>(0x03 | static_cast<std::uint8_t>(u.function));
    }
    return o;
}

ControlDecode decode_control_field(const std::uint8_t* o) {
    ControlDecode out;
    if ((o[0] & 0x01) == 0) {
        out.field = IFrame{static_cast<std::uint16_t>((o[0] >> 1) | (o[1] << 7)),
                           static_cast<std::uint16_t>((o[2] >> 1) | (o[3] << 7))};
        return out;
    }
    if ((o[0] & 0x03) == 0x01) {
        out.field = SFrame{static_cast<std::uint16_t>((o[2] >> 1) | (o[3] << 7))};
        return out;
    }
    // U-frame: exactly one function bit must be set
    const std::uint8_t bits = static_cast<std::uint8_t>(o[0] & 0xFC);
    if (bits == 0 || (bits & (bits - 1)) != 0 || o[1] != 0 || o[2] != 0 || o[3] != 0) {
        out.status = DecodeStatus::MalformedControl;
        return out;
    }
    out.field = UFrame{static_cast<UFunction>(bits)};
    return out;
}

std::vector<std::uint8_t> encode_apdu(const Apdu& apdu) {
    std::vector<std::uint8_t> out;
    out.reserve(32);
    out.push_back(0x68);
    out.push_back(0);  // length patched below
    const auto cf = encode_control_field(apdu.control);
    out.insert(out.end(), cf.begin(), cf.end());
    if (apdu.asdu) {
        const Asdu& a = *apdu.asdu;
        out.push_back(static_cast<std::uint8_t>(a.type_id));
        out.push_back(static_cast<std::uint8_t>((a.sq_flag ? 0x80 : 0x00) |
                                                (a.objects.size() & 0x7F)));
        out.push_back(static_cast<std::uint8_t>(a.cot));
        out.push_back(a.origin_address);
        put_u16le(out, a.common_address);
        bool first = true;
        for (const auto& io : a.objects) {
            if (!a.sq_flag || first) put_ioa(out, io.ioa);
            put_element(out, a.type_id, io.value);
            first = false;
        }
    }
    const std::size_t len = out.size() - 2;
    if (len > 253) throw FrameTooLarge();
    out[1] = static_cast<std::uint8_t>(len);
    return out;
}

DecodeResult decode_apdu(const std::uint8_t* data, std::size_t size) {
    DecodeResult res;
    if (size < 1) {
        res.status = DecodeStatus::NeedMoreData;
        return res;
    }
    if (data[0] != 0x68) {
        res.status = DecodeStatus::BadStartByte;
        return res;
    }
    if (size < 2) {
        res.status = DecodeStatus::NeedMoreData;
        return res;
    }
    const std::size_t len = data[1];
    if (len < 4) {
        res.status = DecodeStatus::Malformed;
        return res;
    }
    if (size < 2 + len) {
        res.status = DecodeStatus::NeedMoreData;
        return res;
    }
    const auto cd = decode_control_field(data + 2);
    if (cd.status != DecodeStatus::Ok) {
        res.status = cd.status;
        return res;
    }
    Apdu apdu;
    apdu.control = cd.field;
    const bool is_i = std::holds_alternative<IFrame>(cd.field);
    if (!is_i) {
        if (len != 4) {
            res.status = DecodeStatus::Malformed;
            return res;
        }
        res.apdu = std::move(apdu);
        res.consumed = 2 + len;
        return res;
    }
    Reader r{data + 6, len - 4};
    if (!r.need(6)) {
        res.status = DecodeStatus::Malformed;
        return res;
    }
    const std::uint8_t type_raw = r.u8();
    if (!known_type(type_raw)) {
        res.status = DecodeStatus::UnsupportedTypeId;
        return res;
    }
    Asdu asdu;
    asdu.type_id = static_cast<TypeId>(type_raw);
    const std::uint8_t vsq = r.u8();
    asdu.sq_flag = (vsq & 0x80) != 0;
    const std::size_t count = vsq & 0x7F;
    asdu.cot = static_cast<Cot>(r.u8());
    asdu.origin_address = r.u8();
    asdu.common_address = r.u16le();
    if (count == 0) {
        res.status = DecodeStatus::Malformed;
        return res;
    }
    std::uint32_t base_ioa = 0;
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t ioa;
        if (!asdu.sq_flag || i == 0) {
            if (!r.need(3)) {
                res.status = DecodeStatus::Malformed;
                return res;
            }
            ioa = r.u24le();
            base_ioa = ioa;
        } else {
            ioa = base_ioa + static_cast<std::uint32_t>(i);
        }
        auto v = read_element(r, asdu.type_id);
        if (!v) {
            res.status = DecodeStatus::Malformed;
            return res;
        }
        asdu.objects.push_back(InformationObject{ioa, std::move(*v)});
    }
    if (r.pos != r.n) {
        res.status = DecodeStatus::Malformed;
        return res;
    }
    apdu.asdu = std::move(asdu);
    res.apdu = std::move(apdu);
    res.consumed = 2 + len;
    return res;
}

DecodeResult decode_apdu(const std::vector<std::uint8_t>& data) {
    return decode_apdu(data.data(), data.size());
}

}  // namespace gridwatch::iec104
