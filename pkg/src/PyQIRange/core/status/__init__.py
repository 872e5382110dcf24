'''
Status Submodule

Contains modules that report analysis results to the console and to report.yaml.
'''