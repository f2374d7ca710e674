"""Database-to-graph population and row-level lineage resolution.

Population walks views first, then tables.  View columns are named bare and
table columns are prefixed with the table name (the published procedure's
asymmetry, kept verbatim; ``prefix_view_columns`` switches to uniform
prefixing).  Lineage resolution matches tuples against the graph through the
conjunctive pattern engine and links every satisfying (source row, target
row) pair.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .kgstore import (
    RDF_TYPE,
    KnowledgeGraph,
    Literal,
    canonical_lexical,
    match_pattern,
)
from .ontology import OntologyProfile, ProfileError, vocabulary
from .reldb import DTYPE_KINDS, Database, Relation
from .scenario import LineageTuple, Scenario, execute_scenarios

LINEAGE_FAMILIES = (
    "rowDerivedFrom",
    "columnDerivedFrom",
    "valueDerivedFrom",
    "tableDerivedFrom",
)

# DataType subclass by dtype family
_DATATYPE_CLASS = {
    "integer": "NumericType",
    "decimal": "NumericType",
    "boolean": "BooleanType",
    "date": "TemporalType",
    "varchar": "CharacterType",
}


class ConvertError(Exception):
    pass


@dataclass(frozen=True)
class ConvertConfig:
    profile: str  # "baseline" | "rddl"
    use_data: bool = True
    namespace: str = ""
    emit_notnull: bool = True
    prefix_view_columns: bool = False

    def resolved_namespace(self) -> str:
        return self.namespace or self.profile


@dataclass(frozen=True)
class ExecutionRecord:
    """A query execution to record under the rddl profile."""

    name: str
    sources: tuple[str, ...]
    output: str


@dataclass(frozen=True)
class DataTypeRef:
    node: int
    type_name: str
    length: Optional[int]


def sanitize(name: str) -> str:
    return name.replace(" ", "_")


def _iri(ns: str, local: str) -> str:
    return f"{ns}:{local}"


def local_name(iri: str) -> str:
    return iri.split(":", 1)[1] if ":" in iri else iri


def resolve_type(
    g: KnowledgeGraph, profile: OntologyProfile, dtype: str, length: Optional[int]
) -> DataTypeRef:
    """Return the interned datatype individual for (dtype, length)."""
    if profile.name != "rddl":
        raise ProfileError("datatypes exist only under the rddl profile")
    interned: dict = g.meta.setdefault("datatype_intern", {})
    key = (dtype, length)
    if key in interned:
        return interned[key]
    ns = g.namespace
    local = f"dt_{dtype}" if length is None else f"dt_{dtype}_{length}"
    node = g.add_node(_iri(ns, local))
    rdf_type = g.relation_id(RDF_TYPE)
    g.add_triple(node, rdf_type, g.add_node(_iri(ns, _DATATYPE_CLASS[dtype])))
    g.add_triple(node, g.relation_id("typeName"), Literal(dtype, "string"))
    if length is not None:
        g.add_triple(node, g.relation_id("typeLength"), Literal(str(length), "integer"))
    ref = DataTypeRef(node, dtype, length)
    interned[key] = ref
    return ref


def _emit_rows(g: KnowledgeGraph, rel: Relation, obj_node: int,
               column_nodes: list[int], rels: dict,
               row_class: int, cell_class: int) -> None:
    ns = g.namespace
    base = sanitize(rel.name)
    rdf_type = rels[RDF_TYPE]
    for i, row in enumerate(rel.rows):
        row_node = g.add_node(_iri(ns, f"{base}_r{i}"))
        g.add_triple(row_node, rdf_type, row_class)
        g.add_triple(obj_node, rels["hasRow"], row_node)
        for j, (col, value) in enumerate(zip(rel.table.columns, row)):
            if value is None:
                continue  # NULL cells have no value individual
            cell_node = g.add_node(_iri(ns, f"{base}_r{i}_c{j}"))
            g.add_triple(cell_node, rdf_type, cell_class)
            g.add_triple(row_node, rels["hasCellValue"], cell_node)
            g.add_triple(cell_node, rels["belongsToColumn"], column_nodes[j])
            g.add_triple(
                cell_node, rels["exactValue"], Literal(value, DTYPE_KINDS[col.dtype])
            )


def populate_kg(
    g: KnowledgeGraph,
    db: Database,
    cfg: ConvertConfig,
    executions: Sequence[ExecutionRecord] = (),
) -> dict[str, int]:
    """Convert a database into the graph under the configured profile.

    Returns a population report (node/triple counts by class).
    """
    if len(g) != 0:
        raise ConvertError("populate_kg requires an empty graph")
    profile = vocabulary(cfg.profile)
    ns = cfg.resolved_namespace()
    g.namespace = ns
    g.meta["namespace"] = ns
    g.meta["profile"] = cfg.profile

    rels: dict = {RDF_TYPE: g.add_relation(RDF_TYPE)}
    for name in sorted(profile.property_names()):
        rels[name] = g.add_relation(name)

    class_nodes: dict[str, int] = {}

    def class_node(name: str) -> int:
        if name not in class_nodes:
            profile.get_class(name)  # existence check
            class_nodes[name] = g.add_node(_iri(ns, name))
        return class_nodes[name]

    is_rddl = cfg.profile == "rddl"

    def typed_node(local: str, cls: str) -> int:
        node = g.add_node(_iri(ns, local))
        g.add_triple(node, rels[RDF_TYPE], class_node(cls))
        return node

    object_nodes: dict[str, int] = {}
    row_class = class_node("Row") if cfg.use_data else -1
    cell_class = class_node("CellValue") if cfg.use_data else -1

    # views first, bare column names unless prefixing is requested
    for view_name in sorted(db.views):
        view = db.views[view_name]
        cls = view.object_class if is_rddl else "Table"
        v_node = typed_node(sanitize(view_name), cls)
        object_nodes[view_name] = v_node
        column_nodes = []
        for col in view.table.columns:
            local = (f"{sanitize(view_name)}_{sanitize(col.name)}"
                     if cfg.prefix_view_columns else sanitize(col.name))
            c_node = typed_node(local, "Column")
            g.add_triple(v_node, rels["hasColumn"], c_node)
            column_nodes.append(c_node)
        if cfg.use_data:
            _emit_rows(g, view, v_node, column_nodes, rels, row_class, cell_class)

    # tables, with prefixed column names and (rddl) schema metadata
    for table_name in sorted(db.tables):
        table = db.tables[table_name]
        t_node = typed_node(sanitize(table_name), "Table")
        object_nodes[table_name] = t_node
        column_nodes = []
        fk_by_column = {fk.column: fk for fk in table.table.foreign_keys}
        for col in table.table.columns:
            c_node = typed_node(f"{sanitize(table_name)}_{sanitize(col.name)}", "Column")
            g.add_triple(t_node, rels["hasColumn"], c_node)
            column_nodes.append(c_node)
            if not is_rddl:
                continue
            g.add_triple(
                c_node, rels["isNullable"],
                Literal("true" if col.nullable else "false", "boolean"),
            )
            dt = resolve_type(g, profile, col.dtype, col.length)
            g.add_triple(c_node, rels["hasDatatype"], dt.node)
            if col.is_pk:
                pk_node = typed_node(f"PK_{sanitize(table_name)}", "PrimaryKey")
                g.add_triple(c_node, rels["hasConstraint"], pk_node)
            if col.is_fk and col.name in fk_by_column:
                fk = fk_by_column[col.name]
                fk_node = typed_node(sanitize(fk.name), "ForeignKey")
                g.add_triple(c_node, rels["hasConstraint"], fk_node)
            if cfg.emit_notnull and not col.nullable and not col.is_pk:
                nn_node = typed_node(
                    f"NN_{sanitize(table_name)}_{sanitize(col.name)}", "NotNullConstraint"
                )
                g.add_triple(c_node, rels["hasConstraint"], nn_node)
        if cfg.use_data:
            _emit_rows(g, table, t_node, column_nodes, rels, row_class, cell_class)

    if is_rddl:
        for table_name in sorted(db.tables):
            for fk in db.tables[table_name].table.foreign_keys:
                if fk.ref_table not in object_nodes:
                    raise ConvertError(
                        f"FK {fk.name!r} target table {fk.ref_table!r} absent from graph"
                    )
                fk_node = g.node_id(_iri(ns, sanitize(fk.name)))
                g.add_triple(
                    fk_node, rels["referencesTable"], object_nodes[fk.ref_table]
                )

    if is_rddl and executions:
        for record in sorted(executions, key=lambda r: r.name):
            q_node = typed_node(sanitize(record.name), "Query")
            e_node = typed_node(f"{sanitize(record.name)}_exec", "QueryExecution")
            g.add_triple(e_node, rels["executesQuery"], q_node)
            for source in record.sources:
                if source not in object_nodes:
                    raise ConvertError(f"execution source {source!r} absent from graph")
                g.add_triple(e_node, rels["usesTable"], object_nodes[source])
            if record.output not in object_nodes:
                raise ConvertError(f"execution output {record.output!r} absent from graph")
            if cfg.use_data:
                out_rel = db.relation(record.output)
                base = sanitize(record.output)
                for i in range(len(out_rel.rows)):
                    g.add_triple(
                        e_node, rels["generatesRow"], g.node_id(_iri(ns, f"{base}_r{i}"))
                    )

    return population_report(g)


def population_report(g: KnowledgeGraph) -> dict[str, int]:
    report = {"nodes": g.num_nodes, "triples": len(g)}
    if g.has_relation(RDF_TYPE):
        type_rel = g.relation_id(RDF_TYPE)
        for (_, _, o) in g.lookup(r=type_rel):
            if not isinstance(o, Literal):
                key = f"class.{local_name(g.node_iri(o))}"
                report[key] = report.get(key, 0) + 1
    return report


# -- Algorithm 2: lineage resolution -------------------------------------------


@dataclass
class LineageResolution:
    row_pairs: list[tuple[int, int]] = field(default_factory=list)  # (dst, src)
    column_pairs: list[tuple[int, int]] = field(default_factory=list)
    value_pairs: list[tuple[int, int]] = field(default_factory=list)
    table_pairs: list[tuple[int, int]] = field(default_factory=list)
    added: dict[str, int] = field(default_factory=dict)


def _locals_index(g: KnowledgeGraph) -> dict[str, int]:
    index = g.meta.get("locals_index")
    if index is None or len(index) != g.num_nodes:
        index = {local_name(iri): node_id for node_id, iri in enumerate(g.iris())}
        g.meta["locals_index"] = index
    return index


def _find_column(g: KnowledgeGraph, obj_node: int, table: str, column: str,
                 has_column: int) -> Optional[int]:
    wanted = {sanitize(column), f"{sanitize(table)}_{sanitize(column)}"}
    for candidate in g.objects_of(obj_node, has_column):
        if local_name(g.node_iri(candidate)) in wanted:
            return candidate
    return None


def _match_rows(g: KnowledgeGraph, obj_node: int, col_node: int, value: str,
                rels: dict) -> list[tuple[int, int]]:
    """Rows (and their cells) of obj whose cell in col has the exact value."""
    kind = None
    for (cell, _, _) in g.lookup(r=rels["belongsToColumn"], o=col_node):
        for lit in g.objects_of(cell, rels["exactValue"]):
            if isinstance(lit, Literal):
                kind = lit.kind
                break
        if kind:
            break
    if kind is None:
        return []
    try:
        literal = Literal(canonical_lexical(value, kind), kind)
    except ValueError:
        return []
    bindings = match_pattern(g, [
        ("?x", rels["exactValue"], literal),
        ("?x", rels["belongsToColumn"], col_node),
        ("?r", rels["hasCellValue"], "?x"),
        (obj_node, rels["hasColumn"], col_node),
    ])
    return [(b["?r"], b["?x"]) for b in bindings]


def resolve_lineage_detailed(
    g: KnowledgeGraph,
    tuples: Iterable[LineageTuple],
    materialize: Sequence[str] = LINEAGE_FAMILIES,
    strict: bool = False,
) -> LineageResolution:
    """Match each tuple against the graph and link the satisfying pairs.

    Only the edge families listed in ``materialize`` are inserted; matched
    pairs for every family are reported regardless, so a caller can withhold
    edges and keep them as ground truth.
    """
    for family in materialize:
        if family not in LINEAGE_FAMILIES:
            raise ConvertError(f"unknown lineage family: {family!r}")
    rels = {name: g.relation_id(name)
            for name in ("hasColumn", "hasCellValue", "belongsToColumn", "exactValue")
            + LINEAGE_FAMILIES}
    rdf_type = g.relation_id(RDF_TYPE)
    locals_index = _locals_index(g)
    profile_name = g.meta.get("profile", "rddl")
    role_nodes: dict[str, int] = {}
    if profile_name == "rddl":
        for role in ("SourceDataCandidate", "TargetDataCandidate"):
            node = locals_index.get(role)
            if node is None:
                node = g.add_node(f"{g.namespace}:{role}")
                locals_index[role] = node
            role_nodes[role] = node

    result = LineageResolution(added={family: 0 for family in LINEAGE_FAMILIES})
    seen: dict[str, set] = {family: set() for family in LINEAGE_FAMILIES}

    def record(family: str, pairs: list[tuple[int, int]], sink: list) -> None:
        for pair in pairs:
            if pair in seen[family]:
                continue
            seen[family].add(pair)
            sink.append(pair)
            if family in materialize:
                if g.add_triple(pair[0], rels[family], pair[1]):
                    result.added[family] += 1

    for t in tuples:
        src_obj = locals_index.get(sanitize(t.t1))
        dst_obj = locals_index.get(sanitize(t.t2))
        if src_obj is None or dst_obj is None:
            raise ConvertError(f"unresolvable table in tuple {t}")
        c1 = _find_column(g, src_obj, t.t1, t.c1, rels["hasColumn"])
        c2 = _find_column(g, dst_obj, t.t2, t.c2, rels["hasColumn"])
        if c1 is None or c2 is None:
            raise ConvertError(f"unresolvable column in tuple {t}")
        src_matches = _match_rows(g, src_obj, c1, t.v1, rels)
        dst_matches = _match_rows(g, dst_obj, c2, t.v2, rels)
        if strict and (len(src_matches) > 1 or len(dst_matches) > 1):
            raise ConvertError(f"ambiguous match for tuple {t}")
        if not src_matches or not dst_matches:
            continue
        record("rowDerivedFrom",
               [(dr, sr) for (dr, _) in dst_matches for (sr, _) in src_matches],
               result.row_pairs)
        record("columnDerivedFrom", [(c2, c1)], result.column_pairs)
        record("valueDerivedFrom",
               [(dx, sx) for (_, dx) in dst_matches for (_, sx) in src_matches],
               result.value_pairs)
        record("tableDerivedFrom", [(dst_obj, src_obj)], result.table_pairs)
        if "tableDerivedFrom" in materialize and role_nodes:
            g.add_triple(dst_obj, rdf_type, role_nodes["SourceDataCandidate"])
            g.add_triple(src_obj, rdf_type, role_nodes["TargetDataCandidate"])
    return result


def resolve_lineage(g: KnowledgeGraph, tuples: Iterable[LineageTuple],
                    strict: bool = False) -> int:
    """Insert all four lineage families; returns new rowDerivedFrom edges."""
    result = resolve_lineage_detailed(g, tuples, strict=strict)
    return result.added["rowDerivedFrom"]


# -- inductive train/test split ---------------------------------------------------


@dataclass
class SplitResult:
    train: KnowledgeGraph
    test: KnowledgeGraph
    ground_truth: list[tuple[int, int]]  # (dst row, src row) node ids in test graph
    train_report: dict[str, int]
    test_report: dict[str, int]

    def ground_truth_iris(self) -> list[tuple[str, str]]:
        return [
            (self.test.node_iri(dst), self.test.node_iri(src))
            for (dst, src) in self.ground_truth
        ]


def _executions_for(scenarios: Sequence[Scenario]) -> list[ExecutionRecord]:
    records = []
    for scenario in scenarios:
        for spec in scenario.transformations:
            records.append(ExecutionRecord(
                name=f"{spec.output_name}_q",
                sources=spec.sources,
                output=spec.output_name,
            ))
    return records


def split_train_test(
    suite,
    task_name: str,
    cfg: ConvertConfig,
    n_train: Optional[int] = None,
    withhold: Sequence[str] = ("rowDerivedFrom",),
    test_executions: bool = True,
) -> SplitResult:
    """Build node-disjoint train/test graphs for one task.

    Train scenarios are fully resolved (all lineage families present); in the
    test graph the ``withhold`` families are kept out and the rowDerivedFrom
    pairs are returned as ground truth.
    """
    if suite.db is None:
        raise ConvertError("suite carries no database")
    scenarios = suite.scenarios_for(task_name)
    if n_train is None:
        n_train = max(1, len(scenarios) - 3)
    if not 0 < n_train < len(scenarios):
        raise ConvertError(f"bad train split: {n_train} of {len(scenarios)}")
    if "rowDerivedFrom" not in withhold:
        raise ConvertError("rowDerivedFrom is the prediction target; must be withheld")

    base_ns = cfg.namespace or cfg.profile

    def build(group: Sequence[Scenario], suffix: str, executions_on: bool,
              materialize: Sequence[str]):
        db, _ = execute_scenarios(suite.db, list(group))
        group_cfg = ConvertConfig(
            profile=cfg.profile,
            use_data=True,
            namespace=f"{base_ns}.{suffix}",
            emit_notnull=cfg.emit_notnull,
            prefix_view_columns=cfg.prefix_view_columns,
        )
        g = KnowledgeGraph()
        executions = _executions_for(group) if executions_on else []
        report = populate_kg(g, db, group_cfg, executions=executions)
        tuples = [t for scenario in group for t in scenario.all_tuples()]
        resolution = resolve_lineage_detailed(g, tuples, materialize=materialize)
        return g, resolution, report

    train_g, _, train_report = build(
        scenarios[:n_train], "train", True, LINEAGE_FAMILIES
    )
    test_materialize = tuple(f for f in LINEAGE_FAMILIES if f not in withhold)
    test_g, test_resolution, test_report = build(
        scenarios[n_train:], "test", test_executions, test_materialize
    )
    return SplitResult(
        train=train_g,
        test=test_g,
        ground_truth=list(test_resolution.row_pairs),
        train_report=population_report(train_g),
        test_report=population_report(test_g),
    )


# -- artifact I/O ------------------------------------------------------------------


def write_ground_truth(path, split: SplitResult) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src", "dst"])
        for dst_iri, src_iri in split.ground_truth_iris():
            writer.writerow([src_iri, dst_iri])


def read_ground_truth(path, g: KnowledgeGraph) -> list[tuple[int, int]]:
    pairs = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["src", "dst"]:
            raise ConvertError(f"bad ground truth header: {header!r}")
        for src_iri, dst_iri in reader:
            pairs.append((g.node_id(dst_iri), g.node_id(src_iri)))
    return pairs


def write_report(path, report: dict[str, int]) -> None:
    lines = [f"{key}={report[key]}" for key in sorted(report)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
