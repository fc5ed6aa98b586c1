"""AIS domain records: position reports, vessel tracks, quality accounting."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .geo import LatLon


class VesselClass(str, Enum):
    CARGO = "Cargo"
    TANKER = "Tanker"
    FISHING = "Fishing"
    PASSENGER = "Passenger"
    TUG = "Tug"
    PLEASURE = "Pleasure"
    OTHER = "Other"
    UNKNOWN = "Unknown"


def classify_vessel(type_code: int | None) -> VesselClass:
    """Map an AIS ship-type integer onto the pipeline's vessel classes.

    Total on any integer; codes outside the recognized bands are Other,
    an absent code is Unknown.
    """
    if type_code is None:
        return VesselClass.UNKNOWN
    if 70 <= type_code <= 79:
        return VesselClass.CARGO
    if 80 <= type_code <= 89:
        return VesselClass.TANKER
    if type_code == 30:
        return VesselClass.FISHING
    if 60 <= type_code <= 69:
        return VesselClass.PASSENGER
    if type_code == 52:
        return VesselClass.TUG
    if type_code in (36, 37):
        return VesselClass.PLEASURE
    return VesselClass.OTHER


# MID (first three MMSI digits) -> ISO 3166 alpha-2 flag, major maritime
# registries only; unknown prefixes yield no flag.
MID_TO_FLAG = {
    201: "AL", 203: "AT", 205: "BE", 207: "BG", 209: "CY", 210: "CY",
    211: "DE", 212: "CY", 213: "GE", 214: "MD", 215: "MT", 218: "DE",
    219: "DK", 220: "DK", 224: "ES", 225: "ES", 226: "FR", 227: "FR",
    228: "FR", 229: "MT", 230: "FI", 231: "FO", 232: "GB", 233: "GB",
    234: "GB", 235: "GB", 236: "GI", 237: "GR", 238: "HR", 239: "GR",
    240: "GR", 241: "GR", 242: "MA", 243: "HU", 244: "NL", 245: "NL",
    246: "NL", 247: "IT", 248: "MT", 249: "MT", 250: "IE", 251: "IS",
    252: "LI", 253: "LU", 254: "MC", 255: "PT", 256: "MT", 257: "NO",
    258: "NO", 259: "NO", 261: "PL", 262: "ME", 263: "PT", 264: "RO",
    265: "SE", 266: "SE", 267: "SK", 268: "SM", 269: "CH", 270: "CZ",
    271: "TR", 272: "UA", 273: "RU", 274: "MK", 275: "LV", 276: "EE",
    277: "LT", 278: "SI", 279: "RS", 303: "US", 304: "AG", 305: "AG",
    306: "CW", 308: "BS", 309: "BS", 310: "BM", 311: "BS", 316: "CA",
    319: "KY", 338: "US", 339: "JM", 341: "KN", 343: "HN", 345: "MX",
    351: "PA", 352: "PA", 353: "PA", 354: "PA", 355: "PA", 370: "PA",
    371: "PA", 372: "PA", 373: "PA", 374: "PA", 376: "VC", 377: "VC",
    403: "SA", 412: "CN", 413: "CN", 414: "CN", 416: "TW", 419: "IN",
    422: "IR", 428: "IL", 431: "JP", 432: "JP", 440: "KR", 441: "KR",
    457: "MN", 470: "AE", 471: "AE", 477: "HK", 511: "PW", 533: "MY",
    548: "PH", 563: "SG", 564: "SG", 565: "SG", 566: "SG", 567: "TH",
    572: "TV", 574: "VN", 577: "VU", 603: "ZA", 605: "DZ", 613: "CM",
    620: "KM", 621: "DJ", 622: "EG", 636: "LR", 637: "LR", 642: "LY",
    657: "NG", 667: "SL", 671: "TG", 672: "TN", 677: "TZ", 710: "BR",
    725: "CL", 730: "CO", 735: "EC", 760: "PE", 770: "UY", 775: "VE",
}


def flag_from_mmsi(mmsi: int) -> str | None:
    """Derive the flag country from the MMSI MID prefix, if recognized."""
    return MID_TO_FLAG.get(mmsi // 1_000_000)


@dataclass(frozen=True, slots=True)
class AisRecord:
    """One cleaned AIS position report, reduced to the selected features."""

    mmsi: int
    ts: float  # epoch seconds, UTC
    pos: LatLon
    sog: float | None = None  # knots
    cog: float | None = None  # degrees
    heading: float | None = None  # degrees
    vessel_type: VesselClass = VesselClass.UNKNOWN
    flag: str | None = None
    destination: str | None = None
    nav_status: int | None = None


@dataclass
class VesselTrack:
    """All retained reports of one MMSI, strictly increasing in time."""

    mmsi: int
    vessel_type: VesselClass
    flag: str | None
    records: list[AisRecord]


@dataclass
class QualityReport:
    """Row accounting for an ingest run: every input row lands in exactly
    one bucket (kept, or one rejection reason)."""

    records_in: int = 0
    records_out: int = 0
    rejected_by_reason: dict[str, int] = field(default_factory=dict)
    bytes_in: int = 0
    bytes_out: int = 0

    def reject(self, reason: str) -> None:
        self.rejected_by_reason[reason] = self.rejected_by_reason.get(reason, 0) + 1

    @property
    def rejected_total(self) -> int:
        return sum(self.rejected_by_reason.values())

    def size_reduction_pct(self) -> float | None:
        if self.bytes_in <= 0:
            return None
        return 100.0 * (1.0 - self.bytes_out / self.bytes_in)

    def merge(self, other: "QualityReport") -> None:
        self.records_in += other.records_in
        self.records_out += other.records_out
        self.bytes_in += other.bytes_in
        self.bytes_out += other.bytes_out
        for reason, count in other.rejected_by_reason.items():
            self.rejected_by_reason[reason] = self.rejected_by_reason.get(reason, 0) + count

    def to_dict(self) -> dict:
        out = {
            "records_in": self.records_in,
            "records_out": self.records_out,
            "rejected_by_reason": dict(sorted(self.rejected_by_reason.items())),
            "bytes_in": self.bytes_in,
            "bytes_out": self.bytes_out,
        }
        pct = self.size_reduction_pct()
        if pct is not None:
            out["size_reduction_pct"] = round(pct, 2)
        return out
