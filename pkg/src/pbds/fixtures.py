"""The seven-row ``cities`` example database and its partitions."""
from .partition import RangePartition
from .relation import Relation

CITIES_ROWS = (
    (4200, "Anchorage", "AK"),
    (6000, "San Diego", "CA"),
    (5000, "Sacramento", "CA"),
    (7000, "New York", "NY"),
    (2000, "Buffalo", "NY"),
    (3700, "Austin", "TX"),
    (2500, "Houston", "TX"),
)

CITIES_ATTRS = (("popden", "int"), ("city", "str"), ("state", "str"))

Q2_TEXT = "topk(avgden desc, 1, agg([state], avg(popden) as avgden, scan(cities)))"
Q_POPSTATE_TEXT = "select(totden > 10000, agg([state], sum(popden) as totden, scan(cities)))"
REUSE_TEMPLATE_TEXT = (
    "select(cnt > $2, agg([state], count(*) as cnt, select(popden > $1, scan(cities))))"
)


def cities() -> Relation:
    return Relation.from_rows("cities", CITIES_ATTRS, CITIES_ROWS)


def cities_db() -> dict:
    return {"cities": cities()}


def f_state() -> RangePartition:
    return RangePartition("cities", "state", ("DE", "MI", "OK"),
                          ("[AL,DE]", "[FL,MI]", "[MN,OK]", "[OR,WY]"))


def f_popden() -> RangePartition:
    return RangePartition("cities", "popden", (4000,), ("[0,4000]", "[4001,9000]"))
