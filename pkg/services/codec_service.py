"""
Codec service for instances, traces and tie scripts.

Instances are JSON documents with every rational written as a decimal-free
"p/q" string. Adaptive instances store their recipe ({generator, params,
seed}) instead of expanded edges. Traces are JSON Lines: a header, one record
per arrival and a final record carrying the finalization dual cost.
"""

import hashlib
import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from models import (
    Advertiser, AdSlot, Instance, InstanceMeta, AdaptiveInstance, ArrivalSource,
    InstanceParseError, AlgorithmKind, TieBreak, RunTrace, ArrivalRecord,
    FinalizationRecord, AdvertiserSnapshot, NormalizationEvent
)
from utils import get_logger, parse_rational, format_rational

logger = get_logger(__name__)

TRACE_VERSION = 1


def _rational(value: Any, field_path: str, line: Optional[int] = None) -> Fraction:
    try:
        return parse_rational(value)
    except ValueError as e:
        raise InstanceParseError(str(e), field_path, line)


def _optional_rational(value: Any, field_path: str, line: Optional[int] = None) -> Optional[Fraction]:
    if value is None:
        return None
    return _rational(value, field_path, line)


def _require(data: Dict[str, Any], key: str, field_path: str, line: Optional[int] = None) -> Any:
    if not isinstance(data, dict):
        raise InstanceParseError("expected an object", field_path, line)
    if key not in data:
        raise InstanceParseError(f"missing field '{key}'", f"{field_path}.{key}" if field_path else key, line)
    return data[key]


def _json_value(value: Any) -> Any:
    """Turn recipe/meta parameters into JSON-compatible values"""
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, Instance):
        return {"instance": CodecService.instance_to_dict(value)}
    if isinstance(value, dict):
        return {str(key): _json_value(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_value(item) for item in value]
    return value


def _decode_param(value: Any) -> Any:
    if isinstance(value, dict):
        if set(value) == {"instance"}:
            return CodecService.instance_from_dict(value["instance"])
        return {key: _decode_param(item) for key, item in value.items()}
    if isinstance(value, list):
        return [_decode_param(item) for item in value]
    return value


class CodecService:
    """
    Reads and writes instance files, trace files and tie scripts.
    Every rational survives a round trip exactly.
    """

    # Instances

    @staticmethod
    def meta_to_dict(meta: InstanceMeta) -> Dict[str, Any]:
        return {
            "k": meta.claimed_k,
            "d": meta.claimed_d,
            "known_opt": format_rational(meta.known_opt) if meta.known_opt is not None else None,
            "opt_kind": meta.opt_kind,
            "generator": meta.generator_tag,
            "eps": format_rational(meta.eps) if meta.eps is not None else None,
            "params": _json_value(meta.params),
            "notes": list(meta.notes)
        }

    @staticmethod
    def meta_from_dict(data: Optional[Dict[str, Any]]) -> InstanceMeta:
        if data is None:
            return InstanceMeta()
        if not isinstance(data, dict):
            raise InstanceParseError("expected an object", "meta")
        try:
            claimed_k = data.get("k")
            claimed_d = data.get("d")
            if claimed_k is not None and not isinstance(claimed_k, int):
                raise InstanceParseError("k must be an integer", "meta.k")
            if claimed_d is not None and not isinstance(claimed_d, int):
                raise InstanceParseError("d must be an integer", "meta.d")
            return InstanceMeta(
                claimed_k=claimed_k,
                claimed_d=claimed_d,
                known_opt=_optional_rational(data.get("known_opt"), "meta.known_opt"),
                opt_kind=data.get("opt_kind"),
                generator_tag=data.get("generator"),
                eps=_optional_rational(data.get("eps"), "meta.eps"),
                params=dict(data.get("params") or {}),
                notes=tuple(data.get("notes") or ())
            )
        except (TypeError, AttributeError) as e:
            raise InstanceParseError(f"malformed meta block: {e}", "meta")

    @staticmethod
    def instance_to_dict(instance: Instance) -> Dict[str, Any]:
        return {
            "advertisers": [
                {"id": advertiser.id, "budget": format_rational(advertiser.budget)}
                for advertiser in instance.advertisers
            ],
            "slots": [
                {
                    "id": slot.id,
                    "edges": [{"adv": adv, "bid": format_rational(bid)} for adv, bid in slot.edges]
                }
                for slot in instance.slots
            ],
            "meta": CodecService.meta_to_dict(instance.meta)
        }

    @staticmethod
    def instance_from_dict(data: Dict[str, Any]) -> Instance:
        """Build an Instance; reference and bid errors come from the model itself"""
        advertisers = []
        for position, entry in enumerate(_require(data, "advertisers", "")):
            path = f"advertisers[{position}]"
            advertiser_id = _require(entry, "id", path)
            if not isinstance(advertiser_id, int):
                raise InstanceParseError("id must be an integer", f"{path}.id")
            advertisers.append(Advertiser(advertiser_id, _rational(_require(entry, "budget", path), f"{path}.budget")))

        slots = []
        for position, entry in enumerate(_require(data, "slots", "")):
            path = f"slots[{position}]"
            slot_id = _require(entry, "id", path)
            if not isinstance(slot_id, int):
                raise InstanceParseError("id must be an integer", f"{path}.id")
            edges = []
            for edge_position, edge in enumerate(_require(entry, "edges", path)):
                edge_path = f"{path}.edges[{edge_position}]"
                adv = _require(edge, "adv", edge_path)
                if not isinstance(adv, int):
                    raise InstanceParseError("adv must be an integer", f"{edge_path}.adv")
                edges.append((adv, _rational(_require(edge, "bid", edge_path), f"{edge_path}.bid")))
            slots.append(AdSlot(slot_id, tuple(edges)))

        return Instance(tuple(advertisers), tuple(slots), CodecService.meta_from_dict(data.get("meta")))

    def source_to_dict(self, source: ArrivalSource) -> Dict[str, Any]:
        if isinstance(source, AdaptiveInstance):
            return {
                "adaptive": {
                    "generator": source.generator,
                    "params": _json_value(source.recipe_params()),
                    "seed": source.meta.params.get("seed")
                },
                "meta": self.meta_to_dict(source.meta)
            }
        return self.instance_to_dict(source)

    def source_from_dict(self, data: Dict[str, Any]) -> ArrivalSource:
        if not isinstance(data, dict):
            raise InstanceParseError("expected an object at the top level")
        if "adaptive" in data:
            from .adaptive_sources import build_adaptive

            recipe = data["adaptive"]
            generator = _require(recipe, "generator", "adaptive")
            params = _decode_param(_require(recipe, "params", "adaptive"))
            return build_adaptive(generator, params)
        return self.instance_from_dict(data)

    def dumps(self, source: ArrivalSource) -> str:
        return json.dumps(self.source_to_dict(source), indent=2)

    def loads(self, text: str) -> ArrivalSource:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise InstanceParseError(f"invalid JSON: {e.msg}", line=e.lineno)
        return self.source_from_dict(data)

    def save_instance(self, source: ArrivalSource, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps(source), encoding="utf-8")
        logger.info(f"Saved instance to {path}")
        return path

    def load_instance(self, path: Union[str, Path]) -> ArrivalSource:
        path = Path(path)
        logger.debug(f"Loading instance from {path}")
        return self.loads(path.read_text(encoding="utf-8"))

    def fingerprint(self, instance: Instance) -> str:
        """Stable digest of the graph (advertisers, slots, bids); meta is ignored"""
        graph = self.instance_to_dict(instance)
        graph.pop("meta")
        canonical = json.dumps(graph, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    # Tie scripts

    def save_script(self, tie: TieBreak, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"choices": list(tie.script)}), encoding="utf-8")
        return path

    def load_script(self, path: Union[str, Path]) -> TieBreak:
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise InstanceParseError(f"invalid JSON: {e.msg}", line=e.lineno)
        choices = data.get("choices") if isinstance(data, dict) else data
        if not isinstance(choices, list):
            raise InstanceParseError("expected a list of choices", "choices")
        for position, choice in enumerate(choices):
            if choice is not None and not isinstance(choice, int):
                raise InstanceParseError("choice must be an integer or null", f"choices[{position}]")
        return TieBreak.scripted(choices)

    # Traces

    @staticmethod
    def _snapshots_to_dict(snapshots: Dict[int, AdvertiserSnapshot]) -> Dict[str, Any]:
        encoded = {}
        for adv, snapshot in snapshots.items():
            entry = {"z": format_rational(snapshot.z), "zc": format_rational(snapshot.pending)}
            if snapshot.digits is not None:
                entry["digits"] = [format_rational(digit) for digit in snapshot.digits]
            encoded[str(adv)] = entry
        return encoded

    @staticmethod
    def _snapshots_from_dict(data: Dict[str, Any], line: int) -> Dict[int, AdvertiserSnapshot]:
        snapshots = {}
        if not isinstance(data, dict):
            raise InstanceParseError("expected an object", "duals", line)
        for key, entry in data.items():
            path = f"duals.{key}"
            try:
                adv = int(key)
            except ValueError:
                raise InstanceParseError("advertiser key must be an integer", path, line)
            digits = entry.get("digits") if isinstance(entry, dict) else None
            snapshots[adv] = AdvertiserSnapshot(
                z=_rational(_require(entry, "z", path, line), f"{path}.z", line),
                pending=_rational(entry.get("zc", "0"), f"{path}.zc", line),
                digits=None if digits is None else tuple(
                    _rational(digit, f"{path}.digits", line) for digit in digits)
            )
        return snapshots

    def trace_lines(self, trace: RunTrace) -> List[str]:
        header = {
            "type": "header",
            "version": TRACE_VERSION,
            "algorithm": trace.algorithm.value,
            "k": trace.k,
            "d": trace.d,
            "scaling": format_rational(trace.scaling) if trace.scaling is not None else None,
            "seed": trace.seed,
            "fingerprint": self.fingerprint(trace.instance) if trace.instance is not None else trace.fingerprint,
            "advertisers": len(trace.instance.advertisers) if trace.instance is not None else None,
            "slots": len(trace.arrivals)
        }
        lines = [json.dumps(header)]
        for record in trace.arrivals:
            lines.append(json.dumps({
                "type": "arrival",
                "index": record.index,
                "slot": record.slot_id,
                "feasible": list(record.feasible),
                "decision": record.decision,
                "bid": format_rational(record.bid),
                "dP": format_rational(record.delta_primal),
                "dD": format_rational(record.delta_dual),
                "duals": self._snapshots_to_dict(record.snapshots),
                "events": [
                    {
                        "adv": event.advertiser,
                        "kind": event.kind,
                        "z_gain": format_rational(event.z_gain),
                        "value_drop": format_rational(event.value_drop),
                        "digit_drop": format_rational(event.digit_drop)
                    }
                    for event in record.events
                ]
            }))
        lines.append(json.dumps({
            "type": "final",
            "dD": format_rational(trace.finalization.delta_dual),
            "dual_cost": format_rational(trace.finalization.dual_cost),
            "duals": self._snapshots_to_dict(trace.finalization.snapshots)
        }))
        return lines

    def save_trace(self, trace: RunTrace, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(self.trace_lines(trace)) + "\n", encoding="utf-8")
        logger.info(f"Saved trace with {len(trace.arrivals)} arrivals to {path}")
        return path

    def parse_trace(self, lines: Sequence[str]) -> Tuple[RunTrace, Dict[str, Any]]:
        """Parse JSON Lines into a trace; returns the trace and its header"""
        records = []
        for number, text in enumerate(lines, start=1):
            if not text.strip():
                continue
            try:
                records.append((number, json.loads(text)))
            except json.JSONDecodeError as e:
                raise InstanceParseError(f"invalid JSON: {e.msg}", line=number)

        if not records or records[0][1].get("type") != "header":
            raise InstanceParseError("trace must start with a header record", "type", records[0][0] if records else 1)
        header_line, header = records[0]
        try:
            algorithm = AlgorithmKind(header.get("algorithm"))
        except ValueError:
            raise InstanceParseError(f"unknown algorithm {header.get('algorithm')!r}", "algorithm", header_line)

        trace = RunTrace(
            algorithm=algorithm,
            k=header.get("k"),
            d=header.get("d"),
            scaling=_optional_rational(header.get("scaling"), "scaling", header_line),
            seed=header.get("seed"),
            fingerprint=header.get("fingerprint")
        )

        final_seen = False
        for number, data in records[1:]:
            kind = data.get("type") if isinstance(data, dict) else None
            if final_seen:
                raise InstanceParseError("record after the final record", "type", number)
            if kind == "arrival":
                decision = data.get("decision")
                if decision is not None and not isinstance(decision, int):
                    raise InstanceParseError("decision must be an integer or null", "decision", number)
                events = tuple(
                    NormalizationEvent(
                        advertiser=_require(event, "adv", "events", number),
                        kind=_require(event, "kind", "events", number),
                        z_gain=_rational(_require(event, "z_gain", "events", number), "events.z_gain", number),
                        value_drop=_rational(_require(event, "value_drop", "events", number),
                                             "events.value_drop", number),
                        digit_drop=_rational(_require(event, "digit_drop", "events", number),
                                             "events.digit_drop", number)
                    )
                    for event in data.get("events", [])
                )
                trace.arrivals.append(ArrivalRecord(
                    index=_require(data, "index", "", number),
                    slot_id=_require(data, "slot", "", number),
                    feasible=tuple(_require(data, "feasible", "", number)),
                    decision=decision,
                    bid=_rational(_require(data, "bid", "", number), "bid", number),
                    delta_primal=_rational(_require(data, "dP", "", number), "dP", number),
                    delta_dual=_rational(_require(data, "dD", "", number), "dD", number),
                    snapshots=self._snapshots_from_dict(data.get("duals", {}), number),
                    events=events
                ))
            elif kind == "final":
                trace.finalization = FinalizationRecord(
                    delta_dual=_rational(_require(data, "dD", "", number), "dD", number),
                    dual_cost=_rational(_require(data, "dual_cost", "", number), "dual_cost", number),
                    snapshots=self._snapshots_from_dict(data.get("duals", {}), number)
                )
                final_seen = True
            else:
                raise InstanceParseError(f"unknown record type {kind!r}", "type", number)

        if not final_seen:
            raise InstanceParseError("trace has no final record", "type", len(lines))
        return trace, header

    def load_trace(self, path: Union[str, Path]) -> Tuple[RunTrace, Dict[str, Any]]:
        path = Path(path)
        return self.parse_trace(path.read_text(encoding="utf-8").splitlines())


def get_codec_service() -> CodecService:
    """Get codec service instance"""
    return CodecService()
