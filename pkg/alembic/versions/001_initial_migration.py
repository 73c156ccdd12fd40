"""Initial migration

Revision ID: 001
Revises: 
Create Date: 2024-01-01 12:00:00.000000

"""
from alembic import op
import sqlalchemy as sa

# revision identifiers, used by Alembic.
revision = '001'
down_revision = None
branch_labels = None
depends_on = None


def upgrade() -> None:
    # Create experiment_runs table
    op.create_table('experiment_runs',
        sa.Column('id', sa.Uuid(as_uuid=True), nullable=False),
        sa.Column('created_at', sa.DateTime(), nullable=True),
        sa.Column('algorithm', sa.String(length=20), nullable=True),
        sa.Column('dataset', sa.String(length=500), nullable=True),
        sa.Column('config_hash', sa.String(length=64), nullable=True),
        sa.Column('config', sa.JSON(), nullable=True),
        sa.Column('runs', sa.Integer(), nullable=True),
        sa.Column('failures', sa.Integer(), nullable=True),
        sa.Column('acc_mean', sa.Float(), nullable=True),
        sa.Column('acc_std', sa.Float(), nullable=True),
        sa.Column('nmi_mean', sa.Float(), nullable=True),
        sa.Column('nmi_std', sa.Float(), nullable=True),
        sa.Column('mi_mean', sa.Float(), nullable=True),
        sa.Column('mi_std', sa.Float(), nullable=True),
        sa.Column('purity_mean', sa.Float(), nullable=True),
        sa.Column('purity_std', sa.Float(), nullable=True),
        sa.Column('wall_clock_s', sa.Float(), nullable=True),
        sa.Column('notes', sa.Text(), nullable=True),
        sa.PrimaryKeyConstraint('id')
    )
    op.create_index('ix_experiment_runs_config_hash', 'experiment_runs', ['config_hash'])

    # Create seed_results table
    op.create_table('seed_results',
        sa.Column('id', sa.Uuid(as_uuid=True), nullable=False),
        sa.Column('experiment_run_id', sa.Uuid(as_uuid=True), nullable=True),
        sa.Column('seed', sa.Integer(), nullable=True),
        sa.Column('acc', sa.Float(), nullable=True),
        sa.Column('nmi', sa.Float(), nullable=True),
        sa.Column('mi', sa.Float(), nullable=True),
        sa.Column('mi_raw', sa.Float(), nullable=True),
        sa.Column('purity', sa.Float(), nullable=True),
        sa.Column('iterations', sa.Integer(), nullable=True),
        sa.Column('converged', sa.Boolean(), nullable=True),
        sa.Column('final_objective', sa.Float(), nullable=True),
        sa.Column('failed', sa.Boolean(), nullable=True),
        sa.Column('error', sa.Text(), nullable=True),
        sa.Column('created_at', sa.DateTime(), nullable=True),
        sa.ForeignKeyConstraint(['experiment_run_id'], ['experiment_runs.id'], ),
        sa.PrimaryKeyConstraint('id')
    )


def downgrade() -> None:
    op.drop_table('seed_results')
    op.drop_index('ix_experiment_runs_config_hash', table_name='experiment_runs')
    op.drop_table('experiment_runs')
