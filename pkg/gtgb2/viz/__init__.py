from gtgb2.viz.tables import averaged_table, chain_table, efficiency_table, fit_table, print_banner, render, search_table
