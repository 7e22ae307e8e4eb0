from flakeless_app.cli import main

main()
