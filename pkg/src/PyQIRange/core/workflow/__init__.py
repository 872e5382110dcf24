"""
Workflow Submodule

Contains the WorkflowManager class that orchestrates the subcommands.
"""
