"""
Results-store setup: connectivity, schema checks and table creation.

The schema check goes beyond table names: a store created by an older
revision can hold `experiment_runs` without a column the ORM now writes,
which only surfaces as an INSERT failure at the end of a benchmark.
"""

from typing import Any, Dict, List

from sqlalchemy import func, inspect, select, text
from sqlalchemy.engine import make_url

from .database import DATABASE_URL, Base, engine

REQUIRED_TABLES = ("experiment_runs", "seed_results")


def display_url(url: str = DATABASE_URL) -> str:
    """The database URL with any password masked."""
    return make_url(url).render_as_string(hide_password=True)


def check_database_connection() -> bool:
    """Return True if a trivial query succeeds."""
    try:
        with engine.connect() as conn:
            conn.execute(text("SELECT 1"))
        return True
    except Exception as e:
        print(f"❌ Cannot reach results store {display_url()}: {e}")
        return False


def missing_columns() -> Dict[str, List[str]]:
    """
    Columns the ORM models declare but the live tables lack.

    Tables that do not exist at all are left out; `check_tables_exist`
    reports those.
    """
    inspector = inspect(engine)
    existing = set(inspector.get_table_names())
    gaps = {}
    for name in REQUIRED_TABLES:
        if name not in existing:
            continue
        live = {column["name"] for column in inspector.get_columns(name)}
        declared = [column.name for column in Base.metadata.tables[name].columns]
        lacking = [column for column in declared if column not in live]
        if lacking:
            gaps[name] = lacking
    return gaps


def check_tables_exist() -> bool:
    """Return True if both result tables exist with every declared column."""
    try:
        existing = set(inspect(engine).get_table_names())
        absent = sorted(set(REQUIRED_TABLES) - existing)
        if absent:
            print(f"⚠️  Missing tables: {', '.join(absent)}")
            return False

        gaps = missing_columns()
        if gaps:
            for table, columns in gaps.items():
                print(f"⚠️  {table} lacks columns: {', '.join(columns)} (run 'alembic upgrade head')")
            return False
        return True

    except Exception as e:
        print(f"❌ Error inspecting schema: {e}")
        return False


def create_tables_if_not_exist() -> bool:
    """Create absent result tables; existing tables are left untouched."""
    try:
        if check_tables_exist():
            return True
        Base.metadata.create_all(bind=engine)
        if check_tables_exist():
            print("✅ Result tables ready")
            return True
        print("❌ Result tables are still incomplete")
        return False

    except Exception as e:
        print(f"❌ Error creating tables: {e}")
        return False


def row_counts() -> Dict[str, int]:
    """Number of stored rows per existing result table."""
    existing = set(inspect(engine).get_table_names())
    counts = {}
    with engine.connect() as conn:
        for name in REQUIRED_TABLES:
            if name in existing:
                table = Base.metadata.tables[name]
                counts[name] = conn.execute(select(func.count()).select_from(table)).scalar_one()
    return counts


def initialize_database(force_recreate: bool = False) -> bool:
    """
    Prepare the results store.

    Args:
        force_recreate: Drop both result tables first (stored runs are lost)

    Returns:
        True if the store is ready
    """
    print(f"🚀 Initializing results store at {display_url()}")

    if not check_database_connection():
        print("💡 Set DATABASE_URL (or .env); for PostgreSQL run 'docker-compose up -d postgres'")
        return False

    if force_recreate:
        try:
            Base.metadata.drop_all(bind=engine)
            print("🗑️  Dropped existing result tables")
        except Exception as e:
            print(f"⚠️  Warning: Could not drop tables: {e}")

    if not create_tables_if_not_exist():
        return False

    print("🎯 Ready. Record runs with 'gwntf bench', inspect them with 'python -m gwntf.db_cli list-runs'")
    return True


def get_database_info() -> Dict[str, Any]:
    """Connection status, tables, row counts and schema gaps of the results store."""
    info: Dict[str, Any] = {
        'database_url': display_url(),
        'required_tables': list(REQUIRED_TABLES),
    }
    try:
        info.update(
            connection_status='connected' if check_database_connection() else 'disconnected',
            existing_tables=inspect(engine).get_table_names(),
            tables_exist=check_tables_exist(),
            row_counts=row_counts(),
            missing_columns=missing_columns(),
        )
    except Exception as e:
        info.update(
            connection_status='error',
            error=str(e),
            existing_tables=[],
            tables_exist=False,
            row_counts={},
            missing_columns={},
        )
    return info
