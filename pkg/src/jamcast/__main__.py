from jamcast.cli import main

raise SystemExit(main())
